//! Removal of the `A/L` term.
//!
//! A function `w` with `∂w/∂z̄ = A/L` is built as
//! `w = Σ_j φ_j ζ_j + Π[A/L - Σ_j ∂z̄(φ_j ζ_j)]` where
//! `ζ_j = γ_eff,j log r_j - i P_j(θ_j)` carries the `1/(z - z_j)` singularity
//! of `A/L` exactly and `P_j` is the periodic primitive of the mean-zero part
//! of the angular coefficient. The substitution `u = e^w v` turns
//! `∂u/∂z̄ = (A/L)u + (B/L)ū + F` into `∂v/∂z̄ = (B₁/L)v̄ + F₁` with
//! `B₁ = B e^{w̄ - w}` and `F₁ = e^{-w} F`.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::cauchy::{pompeiu, pompeiu_at, TransformOptions};
use crate::coefficients::{sample_coefficients, CoefficientField, ProblemSpec, SingularPoint};
use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::field::{wirtinger_dbar, GridField};
use crate::grid::{Domain, Grid};
use crate::profile::PeriodicProfile;

/// `φ_1..φ_N` for the given discs, preceded by `φ_0 = 1 - Σ φ_j`.
pub fn build_cutoffs(grid: &Arc<Grid>, centers: &[C64], deltas: &[f64]) -> Result<Vec<GridField>> {
    let cuts = checked_cutoffs(&grid.domain, centers, deltas)?;
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let phis: Vec<GridField> = cuts.iter().map(|c| GridField::from_fn(grid, |z| C64::new(c.value(z), 0.0))).collect();
    out.push(GridField::from_fn(grid, |z| C64::new(1.0 - cuts.iter().map(|c| c.value(z)).sum::<f64>(), 0.0)));
    out.extend(phis);
    Ok(out)
}

pub fn checked_cutoffs(domain: &Domain, centers: &[C64], deltas: &[f64]) -> Result<Vec<Cutoff>> {
    if centers.len() != deltas.len() {
        return Err(Error::Invalid("one radius per center required".into()));
    }
    for (j, (&c, &d)) in centers.iter().zip(deltas).enumerate() {
        if !(d > 0.0) {
            return Err(Error::Invalid(format!("cutoff radius must be positive, got {d}")));
        }
        if domain.boundary_distance(c) < 2.0 * d || !domain.contains(c) {
            return Err(Error::Geometry(format!("cutoff disc D({c}, {}) leaves the domain", 2.0 * d)));
        }
        for k in 0..j {
            if (c - centers[k]).norm() < 2.0 * (d + deltas[k]) {
                return Err(Error::Geometry(format!("cutoff discs around {} and {c} overlap", centers[k])));
            }
        }
    }
    Ok(centers.iter().zip(deltas).map(|(&c, &d)| Cutoff::new(c, d)).collect())
}

/// Angular coefficient `h_j(θ) = 2 e^{-2iθ} p_j(θ) / ∏_{k≠j}(z_j - z_k)`.
pub fn angular_coefficient(point: &SingularPoint) -> PeriodicProfile {
    let c = point.smooth_factor;
    point.p_profile.map(|t, p| 2.0 * C64::from_polar(1.0, -2.0 * t) * p / c)
}

/// Mean-zero part of [`angular_coefficient`]; its mean is `γ_eff`.
pub fn phat(point: &SingularPoint) -> PeriodicProfile {
    let h = angular_coefficient(point);
    let mean = h.mean();
    h.map(|_, v| v - mean)
}

/// Local primitive `ζ_j(z) = γ_eff log|z - z_j| - i P_j(θ)` and the exact
/// `∂z̄ ζ_j = p_j(θ) / (c_j (z - z_j))`.
struct LocalLog {
    center: C64,
    gamma_eff: C64,
    smooth_factor: C64,
    p: PeriodicProfile,
    phat: PeriodicProfile,
    cutoff: Cutoff,
}

impl LocalLog {
    fn new(pt: &SingularPoint) -> Self {
        LocalLog { center: pt.location, gamma_eff: pt.gamma_eff, smooth_factor: pt.smooth_factor, p: pt.p_profile.clone(), phat: phat(pt), cutoff: pt.cutoff() }
    }

    fn zeta(&self, z: C64) -> C64 {
        let d = z - self.center;
        self.gamma_eff * d.norm().ln() - C64::i() * self.phat.primitive(d.im.atan2(d.re))
    }

    fn zeta_dbar(&self, z: C64) -> C64 {
        let d = z - self.center;
        self.p.eval(d.im.atan2(d.re)) / (self.smooth_factor * d)
    }

    /// `φ ζ` and `∂z̄(φ ζ)`.
    fn cut_term(&self, z: C64) -> (C64, C64) {
        let phi = self.cutoff.value(z);
        let dphi = self.cutoff.dbar(z);
        if phi == 0.0 && dphi == C64::new(0.0, 0.0) {
            return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        }
        let zeta = self.zeta(z);
        (phi * zeta, phi * self.zeta_dbar(z) + zeta * dphi)
    }
}

#[derive(Clone, Debug)]
pub struct ReductionResult {
    pub w: GridField,
    /// `w - Σ γ_eff,j log|z - z_j|`.
    pub mu: GridField,
    pub b1: GridField,
    pub f1: GridField,
    /// Singular part `Σ φ_j ζ_j` of `w`.
    pub w_singular: GridField,
    /// `A/L` on the grid.
    pub a_over_l: GridField,
    /// `A/L - Σ ∂z̄(φ_j ζ_j)`, the argument of the Pompeiu transform.
    pub smooth_rhs: GridField,
    pub report: ReductionReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    /// `max |∂z̄w - A/L| · min(1, min_j |z - z_j|)` over verification nodes.
    pub residual: f64,
    pub mu_max: f64,
    pub gamma: Vec<C64>,
    pub gamma_eff: Vec<C64>,
}

/// Builds `w`, `μ`, `B₁` and `F₁` on `grid`.
pub fn build_w(spec: &ProblemSpec, grid: &Arc<Grid>, opts: &TransformOptions) -> Result<ReductionResult> {
    let locs = spec.locations();
    let coeffs = sample_coefficients(spec, grid)?;
    let logs: Vec<LocalLog> = spec.points.iter().map(LocalLog::new).collect();
    let mut sing = Vec::with_capacity(grid.len());
    let mut rhs = Vec::with_capacity(grid.len());
    for (k, &z) in grid.nodes.iter().enumerate() {
        let mut s = C64::new(0.0, 0.0);
        let mut ds = C64::new(0.0, 0.0);
        for l in &logs {
            let (a, b) = l.cut_term(z);
            s += a;
            ds += b;
        }
        sing.push(s);
        rhs.push(coeffs.a_over_l.values()[k] - ds);
    }
    let w_singular = GridField::new(grid.clone(), sing)?;
    let rhs = GridField::new(grid.clone(), rhs)?;
    let smooth = if rhs.values().iter().all(|v| *v == C64::new(0.0, 0.0)) { GridField::zeros(grid) } else { pompeiu(&rhs, opts)? };
    let w = w_singular.add(&smooth)?;
    let gammas_eff = spec.gammas_eff();
    let mu = w.map(|v, z| v - locs.iter().zip(&gammas_eff).map(|(&p, &g)| g * (z - p).norm().ln()).sum::<C64>());

    let b1 = coeffs.b.zip_with(&w, |b, wv, _| b * C64::from_polar(1.0, -2.0 * wv.im))?;
    let f1 = coeffs.f.zip_with(&w, |f, wv, _| if f == C64::new(0.0, 0.0) { f } else { f * (-wv).exp() })?;
    let exclusion = grid.default_exclusion();
    for field in [&w, &b1, &f1] {
        if let Some(k) = field.first_non_finite() {
            if grid.singular_distance(grid.nodes[k]) >= exclusion {
                return Err(Error::NonFinite { node: k, z: grid.nodes[k] });
            }
        }
    }

    let ver = grid.verification_nodes(exclusion);
    let weight = |k: usize| grid.singular_distance(grid.nodes[k]).min(1.0);
    let d_full = wirtinger_dbar(&w)?;
    let residual = d_full
        .nodes
        .iter()
        .zip(&d_full.values)
        .filter(|(k, _)| ver.binary_search(k).is_ok())
        .map(|(&k, &d)| (d - coeffs.a_over_l.values()[k]).norm() * weight(k))
        .fold(0.0, f64::max);
    let mu_max = mu.values().iter().filter(|v| v.re.is_finite() && v.im.is_finite()).map(|v| v.norm()).fold(0.0, f64::max);

    Ok(ReductionResult {
        w,
        mu,
        b1,
        f1,
        w_singular,
        a_over_l: coeffs.a_over_l,
        smooth_rhs: rhs,
        report: ReductionReport { residual, mu_max, gamma: spec.gammas(), gamma_eff: gammas_eff },
    })
}

/// Problem data after the substitution `u = e^w v`.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    /// `A = 0`, `B = B₁`, `F = F₁` as grid samples; point profiles updated.
    pub spec: ProblemSpec,
    pub grid: Arc<Grid>,
}

/// Applies [`build_w`] and packages the reduced equation.
///
/// The reduced point data has `p_j ≡ 0` and `q_j` replaced by the angular
/// limit of `B₁`, which exists when `γ_eff,j` is real (otherwise `e^{w̄-w}`
/// oscillates like `r^{-2i Im γ_eff}` and the original `q_j` is kept).
pub fn reduce(spec: &ProblemSpec, grid: &Arc<Grid>, opts: &TransformOptions) -> Result<(ReducedProblem, ReductionResult)> {
    let res = build_w(spec, grid, opts)?;
    let locs = spec.locations();
    let rhs_at_points = if res.smooth_rhs.max_abs() == 0.0 { vec![C64::new(0.0, 0.0); locs.len()] } else { pompeiu_at(&res.smooth_rhs, &locs, opts)? };
    let mut points = spec.points.clone();
    for (j, pt) in points.iter_mut().enumerate() {
        let local = LocalLog::new(pt);
        if pt.gamma_eff.im.abs() <= 1e-12 * (1.0 + pt.gamma_eff.norm()) {
            let im0 = rhs_at_points[j].im;
            pt.q_profile = pt.q_profile.map(|t, q| q * C64::from_polar(1.0, -2.0 * (-local.phat.primitive(t).re + im0)));
        }
        pt.p_profile = PeriodicProfile::from_samples(vec![C64::new(0.0, 0.0); pt.p_profile.len()])?;
        pt.gamma = C64::new(0.0, 0.0);
        pt.gamma_eff = C64::new(0.0, 0.0);
    }
    let reduced = ProblemSpec {
        domain: spec.domain.clone(),
        points,
        a: CoefficientField::zero(),
        b: CoefficientField::Samples(res.b1.clone()),
        f: CoefficientField::Samples(res.f1.clone()),
        m: spec.m,
        p: spec.p,
        condition_constant: spec.condition_constant,
    };
    Ok((ReducedProblem { spec: reduced, grid: grid.clone() }, res))
}

/// `u = e^w v`.
pub fn unreduce(v: &GridField, result: &ReductionResult) -> Result<GridField> {
    v.zip_with(&result.w, |x, w, _| if x == C64::new(0.0, 0.0) { x } else { x * w.exp() })
}
