//! Equation data: singular points with their angular profiles, coefficient
//! fields, the exponents `γ_j`, the functions `L` and `M`, and the weighted
//! norms of `E_{m,p}` and `X_{m,q}`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::GridField;
use crate::grid::{Domain, Grid};
use crate::profile::{PeriodicProfile, DEFAULT_SAMPLES};

/// `γ = (1/π)∫₀^{2π} e^{-2iθ} p(θ) dθ` by the periodic trapezoid rule.
pub fn compute_gamma(p: &PeriodicProfile) -> C64 {
    let n = p.len();
    let s: C64 = p.samples().iter().enumerate().map(|(k, &v)| v * C64::from_polar(1.0, -2.0 * p.theta(k))).sum();
    s * (2.0 / n as f64)
}

#[derive(Clone, Debug)]
pub struct SingularPoint {
    pub location: C64,
    pub tau: f64,
    pub delta: f64,
    pub p_profile: PeriodicProfile,
    pub q_profile: PeriodicProfile,
    pub gamma: C64,
    /// `γ / ∏_{k≠j}(z_j - z_k)`, the coefficient of `log|z - z_j|` in `w`.
    pub gamma_eff: C64,
    /// `∏_{k≠j}(z_j - z_k)`.
    pub smooth_factor: C64,
}

impl SingularPoint {
    pub fn cutoff(&self) -> Cutoff {
        Cutoff::new(self.location, self.delta)
    }

    /// Profile of the model equation `v_z̄ = Q(θ) v̄ / r` seen at this point:
    /// `Q(θ) = q(θ) e^{-iθ} / ∏_{k≠j}(z_j - z_k)`.
    pub fn model_profile(&self) -> PeriodicProfile {
        let c = self.smooth_factor;
        self.q_profile.map(|t, q| q * C64::from_polar(1.0, -t) / c)
    }
}

pub fn locations(points: &[SingularPoint]) -> Vec<C64> {
    points.iter().map(|p| p.location).collect()
}

/// `∏_{k≠j}(z_j - z_k)`.
pub fn smooth_factor(points: &[C64], j: usize) -> C64 {
    points.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &zk)| points[j] - zk).product()
}

/// `L(z) = ∏(z - z_j)`.
#[allow(non_snake_case)]
pub fn eval_L(points: &[C64], z: C64) -> C64 {
    points.iter().map(|&zj| z - zj).product()
}

/// `M(z) = ∏|z - z_j|^{γ_j}` evaluated as `exp(Σ γ_j log|z - z_j|)`.
#[allow(non_snake_case)]
pub fn eval_M(points: &[SingularPoint], z: C64) -> Result<C64> {
    let locs = locations(points);
    let gammas: Vec<C64> = points.iter().map(|p| p.gamma).collect();
    eval_M_with(&locs, &gammas, z)
}

#[allow(non_snake_case)]
pub fn eval_M_with(points: &[C64], gammas: &[C64], z: C64) -> Result<C64> {
    let mut log = C64::new(0.0, 0.0);
    for (&zj, &g) in points.iter().zip(gammas) {
        let r = (z - zj).norm();
        if r == 0.0 {
            if g == C64::new(0.0, 0.0) {
                continue;
            }
            if g.re > 0.0 {
                return Ok(C64::new(0.0, 0.0));
            }
            return Err(Error::Pole(format!("M has a pole or is undefined at z = {zj} (gamma = {g})")));
        }
        log += g * r.ln();
    }
    Ok(log.exp())
}

fn lp_norm(values: impl Iterator<Item = (usize, C64, f64)>, p: f64, grid: &Grid) -> Result<f64> {
    let mut acc = 0.0f64;
    for (k, v, w) in values {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite { node: k, z: grid.nodes[k] });
        }
        if p.is_infinite() {
            acc = acc.max(v.norm());
        } else {
            acc += w * v.norm().powf(p);
        }
    }
    Ok(if p.is_infinite() { acc } else { acc.powf(1.0 / p) })
}

/// `‖f / L^m‖_{L^p}`.
#[allow(non_snake_case)]
pub fn weighted_norm_E(field: &GridField, m: u32, p: f64, points: &[C64]) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::Invalid(format!("norm exponent must be >= 1, got {p}")));
    }
    let g = field.grid();
    let it = field.values().iter().enumerate().map(|(k, &v)| (k, v / eval_L(points, g.nodes[k]).powi(m as i32), g.weights[k]));
    lp_norm(it, p, g)
}

/// `‖L^m v‖_{L^q}`.
#[allow(non_snake_case)]
pub fn weighted_norm_X(field: &GridField, m: u32, q: f64, points: &[C64]) -> Result<f64> {
    if q < 1.0 {
        return Err(Error::Invalid(format!("norm exponent must be >= 1, got {q}")));
    }
    let g = field.grid();
    let it = field.values().iter().enumerate().map(|(k, &v)| (k, v * eval_L(points, g.nodes[k]).powi(m as i32), g.weights[k]));
    lp_norm(it, q, g)
}

pub type CoefficientFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

#[derive(Clone)]
pub enum CoefficientField {
    Expression(Expr),
    /// `Σ_j φ_j(z) P_j(θ_j) + remainder(z)` with `φ_j ≡ 1` on `D(z_j, δ_j)`.
    ProfileRemainder {
        terms: Vec<(Cutoff, PeriodicProfile)>,
        remainder: Expr,
    },
    /// Values at scattered nodes; evaluation takes the nearest node.
    Samples(GridField),
    Function(CoefficientFn),
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientField::Expression(e) => write!(f, "Expression({e})"),
            CoefficientField::ProfileRemainder { terms, remainder } => write!(f, "ProfileRemainder({} profiles, {remainder})", terms.len()),
            CoefficientField::Samples(g) => write!(f, "Samples({} nodes)", g.len()),
            CoefficientField::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl CoefficientField {
    pub fn zero() -> Self {
        CoefficientField::Expression(Expr::Real(0.0))
    }

    pub fn constant(c: C64) -> Self {
        CoefficientField::Function(Arc::new(move |_| c))
    }

    pub fn function(f: impl Fn(C64) -> C64 + Send + Sync + 'static) -> Self {
        CoefficientField::Function(Arc::new(f))
    }

    /// True when the field is the literal zero expression.
    pub fn is_zero(&self) -> bool {
        matches!(self, CoefficientField::Expression(Expr::Real(x)) if *x == 0.0)
    }

    pub fn eval(&self, z: C64, points: &[C64]) -> Result<C64> {
        match self {
            CoefficientField::Expression(e) => Ok(e.eval(z, points)?),
            CoefficientField::ProfileRemainder { terms, remainder } => {
                let mut v = remainder.eval(z, points)?;
                for (cut, prof) in terms {
                    let phi = cut.value(z);
                    if phi > 0.0 {
                        let w = z - cut.center;
                        v += phi * prof.eval(w.im.atan2(w.re));
                    }
                }
                Ok(v)
            }
            CoefficientField::Samples(f) => {
                let g = f.grid();
                let k = (0..g.len())
                    .min_by(|&a, &b| (g.nodes[a] - z).norm_sqr().total_cmp(&(g.nodes[b] - z).norm_sqr()))
                    .ok_or_else(|| Error::Invalid("empty sample field".into()))?;
                Ok(f.values()[k])
            }
            CoefficientField::Function(f) => {
                let v = f(z);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::Invalid(format!("coefficient is not finite at z = {z}")));
                }
                Ok(v)
            }
        }
    }

    /// Samples the field at every node of `grid`.
    pub fn sample(&self, grid: &Arc<Grid>, points: &[C64]) -> Result<GridField> {
        if let CoefficientField::Samples(f) = self {
            if f.grid().same_as(grid) {
                return GridField::new(grid.clone(), f.values().to_vec());
            }
            let src = f.grid();
            let loc = src.locator();
            let values = grid
                .nodes
                .iter()
                .map(|&z| loc.nearest(z).map(|k| f.values()[k]).ok_or_else(|| Error::Invalid("empty sample field".into())))
                .collect::<Result<Vec<_>>>()?;
            return GridField::new(grid.clone(), values);
        }
        GridField::try_from_fn(grid, |_, z| self.eval(z, points))
    }
}

/// A singular point as supplied by the user; missing fields are derived.
#[derive(Clone, Debug)]
pub struct PointInput {
    pub location: C64,
    pub tau: f64,
    pub delta: Option<f64>,
    pub p_profile: Option<PeriodicProfile>,
    pub q_profile: Option<PeriodicProfile>,
}

impl PointInput {
    pub fn at(location: C64) -> Self {
        PointInput { location, tau: 0.5, delta: None, p_profile: None, q_profile: None }
    }

    pub fn tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn p_profile(mut self, p: PeriodicProfile) -> Self {
        self.p_profile = Some(p);
        self
    }

    pub fn q_profile(mut self, q: PeriodicProfile) -> Self {
        self.q_profile = Some(q);
        self
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub points: Vec<SingularPoint>,
    pub a: CoefficientField,
    pub b: CoefficientField,
    pub f: CoefficientField,
    pub m: u32,
    pub p: f64,
    /// Bound `C` for the remainder check of the coefficients near each point.
    pub condition_constant: f64,
}

pub const DEFAULT_P: f64 = 4.0;
pub const DEFAULT_CONDITION_CONSTANT: f64 = 10.0;

impl ProblemSpec {
    /// Validates the geometry, extracts missing profiles from `a` and `b`,
    /// and computes `γ_j` and `γ_eff,j`.
    pub fn new(domain: Domain, inputs: Vec<PointInput>, a: CoefficientField, b: CoefficientField, f: CoefficientField, m: u32) -> Result<Self> {
        domain.validate()?;
        let locs: Vec<C64> = inputs.iter().map(|p| p.location).collect();
        for (j, &z) in locs.iter().enumerate() {
            if !domain.contains(z) || domain.boundary_distance(z) < domain.margin {
                return Err(Error::Geometry(format!("singular point {z} is not inside the domain at distance >= margin {}", domain.margin)));
            }
            if locs[..j].iter().any(|&w| (w - z).norm() < 1e-12) {
                return Err(Error::Geometry(format!("singular point {z} is repeated")));
            }
        }
        let mut points = Vec::with_capacity(inputs.len());
        for (j, inp) in inputs.into_iter().enumerate() {
            if !(inp.tau > 0.0 && inp.tau < 1.0) {
                return Err(Error::Invalid(format!("tau must lie in (0,1), got {}", inp.tau)));
            }
            let delta = match inp.delta {
                Some(d) => d,
                None => default_delta(&domain, &locs, j),
            };
            if !(delta > 0.0) {
                return Err(Error::Invalid(format!("delta must be positive, got {delta}")));
            }
            let p_profile = match inp.p_profile {
                Some(p) => p,
                None => extract_profile(&a, &locs, j, inp.tau, delta)?,
            };
            let q_profile = match inp.q_profile {
                Some(q) => q,
                None => extract_profile(&b, &locs, j, inp.tau, delta)?,
            };
            if p_profile.len() != q_profile.len() {
                return Err(Error::Invalid("p and q profiles must have the same length".into()));
            }
            let gamma = compute_gamma(&p_profile);
            let c = smooth_factor(&locs, j);
            points.push(SingularPoint { location: inp.location, tau: inp.tau, delta, p_profile, q_profile, gamma, gamma_eff: gamma / c, smooth_factor: c });
        }
        for (j, pj) in points.iter().enumerate() {
            if domain.boundary_distance(pj.location) < 2.0 * pj.delta {
                return Err(Error::Geometry(format!("disc D({}, 2·delta) leaves the domain", pj.location)));
            }
            for pk in &points[..j] {
                if (pj.location - pk.location).norm() < 2.0 * (pj.delta + pk.delta) {
                    return Err(Error::Geometry(format!("discs D(z_j, 2·delta) around {} and {} overlap", pk.location, pj.location)));
                }
            }
        }
        Ok(ProblemSpec { domain, points, a, b, f, m, p: DEFAULT_P, condition_constant: DEFAULT_CONDITION_CONSTANT })
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        if !(p > 2.0) {
            return Err(Error::Invalid(format!("p must exceed 2, got {p}")));
        }
        self.p = p;
        Ok(self)
    }

    pub fn locations(&self) -> Vec<C64> {
        locations(&self.points)
    }

    /// Dual exponent `q = p / (p - 1)`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    #[allow(non_snake_case)]
    pub fn L(&self, z: C64) -> C64 {
        self.points.iter().map(|p| z - p.location).product()
    }

    pub fn gammas(&self) -> Vec<C64> {
        self.points.iter().map(|p| p.gamma).collect()
    }

    pub fn gammas_eff(&self) -> Vec<C64> {
        self.points.iter().map(|p| p.gamma_eff).collect()
    }
}

/// Largest `δ` with `D(z_j, 2δ)` inside the domain and disjoint from the
/// other points' discs, capped at 0.25.
fn default_delta(domain: &Domain, locs: &[C64], j: usize) -> f64 {
    let z = locs[j];
    let mut d = domain.boundary_distance(z) / 2.0;
    for (k, &w) in locs.iter().enumerate() {
        if k != j {
            d = d.min((w - z).norm() / 4.0);
        }
    }
    (0.9 * d).min(0.25)
}

/// Angular limit of a coefficient at `z_j`, extrapolated from three small
/// radii by eliminating `r^τ` and then `r` terms of the remainder.
pub fn extract_profile(coef: &CoefficientField, locs: &[C64], j: usize, tau: f64, delta: f64) -> Result<PeriodicProfile> {
    let r0 = 1e-6 * delta;
    let ratio: f64 = 16.0;
    let a = ratio.powf(-tau);
    let z = locs[j];
    let samples = (0..DEFAULT_SAMPLES)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / DEFAULT_SAMPLES as f64;
            let f = |r: f64| coef.eval(z + C64::from_polar(r, t), locs);
            let (f0, f1, f2) = (f(r0)?, f(r0 / ratio)?, f(r0 / (ratio * ratio))?);
            let g0 = (f1 - a * f0) / (1.0 - a);
            let g1 = (f2 - a * f1) / (1.0 - a);
            Ok((g1 - g0 / ratio) / (1.0 - 1.0 / ratio))
        })
        .collect::<Result<Vec<_>>>()?;
    PeriodicProfile::from_samples(samples)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub point: usize,
    pub coefficient: &'static str,
    pub radii: [f64; 2],
    /// `max_θ |coef(z_j + r e^{iθ}) - profile(θ)| / r^τ` at each radius.
    pub ratios: [f64; 2],
    /// Exponent `g` with `ratio ∝ r^{-g}` between the two radii.
    pub growth: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub constant: f64,
    pub checks: Vec<ConditionCheck>,
    pub passed: bool,
}

/// Ratios above this floor count as measurable when judging growth.
const RATIO_FLOOR: f64 = 1e-9;
/// Largest growth exponent accepted as bounded.
const GROWTH_TOLERANCE: f64 = 0.1;

/// Checks `|coef - profile| ≤ C r^τ` for `A` and `B` at two radii around
/// each point. A check fails if a ratio exceeds `C` or if the ratio grows
/// like a negative power of `r` between the radii.
pub fn verify_condition(spec: &ProblemSpec, radii: [f64; 2]) -> Result<ConditionReport> {
    let locs = spec.locations();
    let n_theta = 256;
    let mut checks = Vec::new();
    for (j, pt) in spec.points.iter().enumerate() {
        for (name, coef, prof) in [("A", &spec.a, &pt.p_profile), ("B", &spec.b, &pt.q_profile)] {
            let mut ratios = [0.0; 2];
            for (slot, &r) in ratios.iter_mut().zip(&radii) {
                if !(r > 0.0 && r < pt.delta) {
                    return Err(Error::Invalid(format!("check radius {r} must lie in (0, delta = {})", pt.delta)));
                }
                let mut worst = 0.0f64;
                for k in 0..n_theta {
                    let t = std::f64::consts::TAU * k as f64 / n_theta as f64;
                    let v = coef.eval(pt.location + C64::from_polar(r, t), &locs)?;
                    worst = worst.max((v - prof.eval(t)).norm());
                }
                *slot = worst / r.powf(pt.tau);
            }
            let (r_big, r_small, q_big, q_small) =
                if radii[0] > radii[1] { (radii[0], radii[1], ratios[0], ratios[1]) } else { (radii[1], radii[0], ratios[1], ratios[0]) };
            let growth = if q_small > RATIO_FLOOR && q_big > RATIO_FLOOR { (q_small / q_big).ln() / (r_big / r_small).ln() } else { 0.0 };
            let passed = ratios.iter().all(|&q| q <= spec.condition_constant) && growth <= GROWTH_TOLERANCE;
            checks.push(ConditionCheck { point: j, coefficient: name, radii, ratios, growth, passed });
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(ConditionReport { constant: spec.condition_constant, checks, passed })
}

/// Samples `A/L`, `B/L` and `F` on a grid.
#[derive(Clone, Debug)]
pub struct SampledCoefficients {
    pub a_over_l: GridField,
    pub b_over_l: GridField,
    pub b: GridField,
    pub f: GridField,
}

pub fn sample_coefficients(spec: &ProblemSpec, grid: &Arc<Grid>) -> Result<SampledCoefficients> {
    let locs = spec.locations();
    let a = spec.a.sample(grid, &locs)?;
    let b = spec.b.sample(grid, &locs)?;
    let f = spec.f.sample(grid, &locs)?;
    let inv_l: Vec<C64> = grid.nodes.par_iter().map(|&z| 1.0 / eval_L(&locs, z)).collect();
    let a_over_l = GridField::new(grid.clone(), a.values().iter().zip(&inv_l).map(|(&x, &y)| x * y).collect())?;
    let b_over_l = GridField::new(grid.clone(), b.values().iter().zip(&inv_l).map(|(&x, &y)| x * y).collect())?;
    Ok(SampledCoefficients { a_over_l, b_over_l, b, f })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::grid::make_grid;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gamma_examples() {
        let g = compute_gamma(&PeriodicProfile::from_fn(64, |t| c((2.0 * t).cos(), 0.0)).unwrap());
        assert_abs_diff_eq!((g - 1.0).norm(), 0.0, epsilon = 1e-12);
        let g = compute_gamma(&PeriodicProfile::constant(c(0.7, -0.2)));
        assert_abs_diff_eq!(g.norm(), 0.0, epsilon = 1e-12);
        let g = compute_gamma(&PeriodicProfile::from_fn(64, |t| C64::from_polar(1.0, 2.0 * t)).unwrap());
        assert_abs_diff_eq!((g - 2.0).norm(), 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn gamma_annihilates_other_modes(k in -3i64..=3, re in -2.0f64..2.0, im in -2.0f64..2.0, re2 in -2.0f64..2.0) {
            let a = c(re, im);
            let b = c(re2, 0.5);
            let p1 = PeriodicProfile::from_fourier(&[(k, 1.0.into())], 64).unwrap();
            let p2 = PeriodicProfile::from_fourier(&[(2, 1.0.into()), (k, 1.0.into())], 64).unwrap();
            let g1 = compute_gamma(&p1);
            let expect = if k == 2 { c(2.0, 0.0) } else { c(0.0, 0.0) };
            prop_assert!((g1 - expect).norm() < 1e-12);
            let combo = PeriodicProfile::from_samples(p1.samples().iter().zip(p2.samples()).map(|(&x, &y)| a * x + b * y).collect()).unwrap();
            let lin = a * g1 + b * compute_gamma(&p2);
            prop_assert!((compute_gamma(&combo) - lin).norm() < 1e-12);
        }

        #[test]
        fn modulus_of_m(x in -0.9f64..0.9, y in -0.9f64..0.9, g1 in -2.0f64..2.0, g2 in -2.0f64..2.0, gi in -1.0f64..1.0) {
            let pts = [c(0.3, 0.1), c(-0.4, -0.2)];
            let z = c(x, y);
            prop_assume!(pts.iter().all(|&p| (p - z).norm() > 1e-3));
            let real = eval_M_with(&pts, &[c(g1, 0.0), c(g2, 0.0)], z).unwrap();
            prop_assert!(real.re > 0.0 && real.im.abs() <= 1e-12 * real.re);
            let cm = eval_M_with(&pts, &[c(g1, gi), c(g2, -gi)], z).unwrap();
            let want = (z - pts[0]).norm().powf(g1) * (z - pts[1]).norm().powf(g2);
            prop_assert!((cm.norm() - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn l_and_m_examples() {
        assert_abs_diff_eq!((eval_L(&[c(0.0, 0.0), c(1.0, 0.0)], c(0.0, 1.0)) - c(-1.0, -1.0)).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(eval_M_with(&[c(0.0, 0.0)], &[c(0.0, 0.0)], c(0.2, 0.1)).unwrap(), c(1.0, 0.0));
        assert_abs_diff_eq!((eval_M_with(&[c(0.0, 0.0)], &[c(2.0, 0.0)], c(0.5, 0.0)).unwrap() - 0.25).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(eval_M_with(&[c(0.0, 0.0)], &[c(2.0, 0.0)], c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!(matches!(eval_M_with(&[c(0.0, 0.0)], &[c(-1.0, 0.0)], c(0.0, 0.0)), Err(Error::Pole(_))));
    }

    fn unit_square() -> Arc<Grid> {
        Arc::new(make_grid(&Domain::rectangle(c(0.0, 0.0), c(1.0, 1.0)).unwrap(), 32, &[], None).unwrap())
    }

    #[test]
    fn norm_e_examples() {
        let pts = [c(2.0, 2.0)];
        let g = unit_square();
        for m in [0u32, 1, 3] {
            let f = GridField::from_fn(&g, |z| eval_L(&pts, z).powi(m as i32));
            for p in [1.5, 4.0] {
                assert_abs_diff_eq!(weighted_norm_E(&f, m, p, &pts).unwrap(), 1.0, epsilon = 1e-10);
            }
        }
        assert_eq!(weighted_norm_E(&GridField::zeros(&g), 2, 4.0, &pts).unwrap(), 0.0);
        let bad = GridField::from_fn(&g, |z| if z.re < 0.1 && z.im < 0.1 { c(f64::NAN, 0.0) } else { c(1.0, 0.0) });
        assert!(matches!(weighted_norm_E(&bad, 0, 2.0, &pts), Err(Error::NonFinite { node: 0, .. })));
    }

    #[test]
    fn norm_e_polynomial_oracle() {
        // ∫∫ (x²+y²)² over [-1,1]² = 4/5 + 4/5 + 8/9 = 112/45
        let exact = (112.0f64 / 45.0).powf(0.25);
        let pts = [c(0.0, 0.0)];
        let g = Arc::new(make_grid(&Domain::square(1.0), 128, &pts, None).unwrap());
        let f = GridField::from_fn(&g, |z| z * z);
        let v = weighted_norm_E(&f, 1, 4.0, &pts).unwrap();
        assert!((v - exact).abs() < 1e-4, "{v} vs {exact}");
    }

    #[test]
    fn norm_x_examples_and_refinement() {
        let pts = [c(0.0, 0.0)];
        let g = unit_square();
        let ptsfar = [c(-1.0, -1.0)];
        let f = GridField::from_fn(&g, |z| 1.0 / eval_L(&ptsfar, z).powi(2));
        assert_abs_diff_eq!(weighted_norm_X(&f, 2, 1.5, &ptsfar).unwrap(), 1.0, epsilon = 1e-10);
        assert_eq!(weighted_norm_X(&GridField::zeros(&g), 2, 1.5, &ptsfar).unwrap(), 0.0);
        let coarse = Arc::new(make_grid(&Domain::square(1.0), 128, &pts, None).unwrap());
        let fine = Arc::new(make_grid(&Domain::square(1.0), 512, &pts, None).unwrap());
        let f = |g: &Arc<Grid>| GridField::from_fn(g, |z| z.conj() / z);
        let a = weighted_norm_X(&f(&coarse), 1, 1.5, &pts).unwrap();
        let b = weighted_norm_X(&f(&fine), 1, 1.5, &pts).unwrap();
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn norm_identity_for_weighted_fields() {
        let pts = [c(0.1, 0.2)];
        let g = Arc::new(make_grid(&Domain::square(1.0), 32, &pts, Some(Default::default())).unwrap());
        let h = GridField::from_fn(&g, |z| (z * 1.3).exp() + z.conj());
        let lh = GridField::from_fn(&g, |z| eval_L(&pts, z).powi(2) * ((z * 1.3).exp() + z.conj()));
        let plain = weighted_norm_E(&h, 0, 4.0, &pts).unwrap();
        let weighted = weighted_norm_E(&lh, 2, 4.0, &pts).unwrap();
        assert!((plain - weighted).abs() <= 1e-12 * plain);
    }

    fn single_point_spec(a: &str, tau: f64) -> ProblemSpec {
        let a = CoefficientField::Expression(parse_expression(a).unwrap());
        ProblemSpec::new(
            Domain::square(1.0),
            vec![PointInput::at(c(0.0, 0.0)).tau(tau).delta(0.3).p_profile(PeriodicProfile::from_fn(256, |t| c((2.0 * t).cos(), 0.0)).unwrap())],
            a,
            CoefficientField::zero(),
            CoefficientField::zero(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn condition_examples() {
        let s = ProblemSpec::new(
            Domain::square(1.0),
            vec![PointInput::at(c(0.0, 0.0)).delta(0.3)],
            CoefficientField::Expression(parse_expression("exp(2i*theta_1)").unwrap()),
            CoefficientField::zero(),
            CoefficientField::zero(),
            1,
        )
        .unwrap();
        assert!((s.points[0].gamma - 2.0).norm() < 1e-8);
        let rep = verify_condition(&s, [0.1, 0.01]).unwrap();
        assert!(rep.passed);
        assert!(rep.checks[0].ratios.iter().all(|&q| q < 1e-6));

        let rep = verify_condition(&single_point_spec("cos(2*theta_1) + r_1^0.5", 0.5), [0.1, 0.01]).unwrap();
        assert!(rep.passed);
        assert!(rep.checks[0].ratios.iter().all(|&q| (q - 1.0).abs() < 1e-9), "{:?}", rep.checks[0]);

        let rep = verify_condition(&single_point_spec("cos(2*theta_1) + r_1^0.25", 0.5), [0.1, 0.01]).unwrap();
        assert!(!rep.passed);
        assert!((rep.checks[0].growth - 0.25).abs() < 1e-9);
    }

    #[test]
    fn profile_extraction_and_gamma_eff() {
        let pts = [c(-0.4, 0.0), c(0.4, 0.0)];
        let s = ProblemSpec::new(
            Domain::square(1.0),
            pts.iter().map(|&z| PointInput::at(z)).collect(),
            CoefficientField::Expression(parse_expression("exp(2i*theta_2) + 0.3*r_2^0.5 + 0.5*cos(2*theta_1)").unwrap()),
            CoefficientField::zero(),
            CoefficientField::zero(),
            0,
        )
        .unwrap();
        assert!((s.points[1].gamma - 2.0).norm() < 1e-8);
        assert!((s.points[1].gamma_eff - 2.0 / 0.8).norm() < 1e-8);
        assert!((s.points[0].gamma - 0.5).norm() < 1e-8);
        assert!((s.points[0].gamma_eff - 0.5 / -0.8).norm() < 1e-8);
    }

    #[test]
    fn spec_geometry_errors() {
        let mk =
            |pts: Vec<PointInput>| ProblemSpec::new(Domain::square(1.0), pts, CoefficientField::zero(), CoefficientField::zero(), CoefficientField::zero(), 0);
        assert!(matches!(mk(vec![PointInput::at(c(0.95, 0.0))]), Err(Error::Geometry(_))));
        assert!(matches!(mk(vec![PointInput::at(c(0.0, 0.0)), PointInput::at(c(0.0, 0.0))]), Err(Error::Geometry(_))));
        assert!(matches!(mk(vec![PointInput::at(c(0.0, 0.0)).delta(0.3), PointInput::at(c(0.5, 0.0)).delta(0.3)]), Err(Error::Geometry(_))));
        assert!(mk(vec![PointInput::at(c(0.0, 0.0)).tau(1.0)]).is_err());
    }

    #[test]
    fn profile_remainder_field() {
        let prof = PeriodicProfile::from_fn(64, |t| C64::from_polar(0.5, t)).unwrap();
        let f = CoefficientField::ProfileRemainder { terms: vec![(Cutoff::new(c(0.0, 0.0), 0.2), prof)], remainder: parse_expression("0.1*r_1").unwrap() };
        let z = C64::from_polar(0.1, 0.7);
        assert!((f.eval(z, &[c(0.0, 0.0)]).unwrap() - (C64::from_polar(0.5, 0.7) + 0.01)).norm() < 1e-13);
        let far = c(0.8, 0.0);
        assert!((f.eval(far, &[c(0.0, 0.0)]).unwrap() - 0.08).norm() < 1e-14);
    }
}
