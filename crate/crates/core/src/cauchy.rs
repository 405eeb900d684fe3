//! The Cauchy–Pompeiu transform `Πg(z) = -(1/π)∫ g(ζ)/(ζ - z) dA(ζ)`, the
//! weighted operator `T u = L^m Π[B ū / L^{m+1}]`, its adjoint, and the
//! particular solution `f = L^m Π[F / L^m]`.
//!
//! Cells far from the target use the midpoint rule. Cells within a few cell
//! radii of the target (including the target's own cell) use the exact
//! integral of the kernel over the cell polygon with the integrand frozen at
//! the node, so the singularity is integrated analytically.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{eval_L, sample_coefficients, weighted_norm_E, ProblemSpec};
use crate::error::{Error, Result};
use crate::field::{wirtinger_d, GridField};
use crate::geometry::cauchy_polygon_integral;
use crate::grid::Grid;

/// Cells closer than this many cell radii are integrated exactly.
const NEAR_FACTOR: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SelfCellRule {
    /// Integrand frozen at the node on the target's own cell.
    #[default]
    Skip,
    /// Adds the first-order Taylor term `-(1/π) ∂_ζ g · |cell|` on lattice cells.
    FirstOrderCorrect,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformOptions {
    /// Sources within `excision_factor · h` of a singular point are dropped from `T`.
    pub excision_factor: f64,
    pub self_cell: SelfCellRule,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions { excision_factor: 2.0, self_cell: SelfCellRule::Skip }
    }
}

impl TransformOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.excision_factor >= 1.0) {
            return Err(Error::Invalid(format!("excision factor must be >= 1, got {}", self.excision_factor)));
        }
        Ok(())
    }
}

/// Per-cell data for near-field detection.
pub struct CauchyQuadrature {
    grid: Arc<Grid>,
    near_r2: Vec<f64>,
}

impl CauchyQuadrature {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let near_r2 = grid
            .nodes
            .iter()
            .zip(&grid.cells)
            .map(|(&z, cell)| {
                let r = cell.iter().map(|&v| (v - z).norm()).fold(0.0, f64::max);
                (NEAR_FACTOR * r).powi(2)
            })
            .collect();
        CauchyQuadrature { grid: grid.clone(), near_r2 }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Weight `c_k(z)` with `∫ g/(ζ - z) dA ≈ Σ_k c_k(z) g_k`.
    #[inline]
    pub fn coefficient(&self, k: usize, z: C64) -> C64 {
        let d = self.grid.nodes[k] - z;
        let r2 = d.norm_sqr();
        if r2 < self.near_r2[k] {
            cauchy_polygon_integral(&self.grid.cells[k], z)
        } else {
            d.conj() * (self.grid.weights[k] / r2)
        }
    }

    /// `Σ_k c_k(z) g_k` over the listed sources (all nodes if `None`).
    pub fn sum_at(&self, g: &[C64], sources: Option<&[usize]>, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        match sources {
            Some(list) => {
                for &k in list {
                    acc += self.coefficient(k, z) * g[k];
                }
            }
            None => {
                for (k, &gk) in g.iter().enumerate() {
                    if gk.re != 0.0 || gk.im != 0.0 {
                        acc += self.coefficient(k, z) * gk;
                    }
                }
            }
        }
        acc
    }
}

fn first_order_terms(g: &GridField, opts: &TransformOptions) -> Result<Option<Vec<C64>>> {
    if opts.self_cell != SelfCellRule::FirstOrderCorrect {
        return Ok(None);
    }
    let grid = g.grid();
    let d = wirtinger_d(g)?;
    let mut corr = vec![C64::new(0.0, 0.0); grid.len()];
    for (&k, &v) in d.nodes.iter().zip(&d.values) {
        corr[k] = -v * grid.weights[k] / PI;
    }
    Ok(Some(corr))
}

/// `Πg` at every node.
pub fn pompeiu(g: &GridField, opts: &TransformOptions) -> Result<GridField> {
    opts.validate()?;
    g.ensure_finite()?;
    let grid = g.grid();
    let quad = CauchyQuadrature::new(grid);
    let corr = first_order_terms(g, opts)?;
    let values = grid
        .nodes
        .par_iter()
        .enumerate()
        .map(|(t, &z)| {
            let v = -quad.sum_at(g.values(), None, z) / PI;
            match &corr {
                Some(c) => v + c[t],
                None => v,
            }
        })
        .collect();
    GridField::new(grid.clone(), values)
}

/// `Πg` at arbitrary points (inside or outside the domain).
pub fn pompeiu_at(g: &GridField, targets: &[C64], opts: &TransformOptions) -> Result<Vec<C64>> {
    opts.validate()?;
    g.ensure_finite()?;
    let quad = CauchyQuadrature::new(g.grid());
    Ok(targets.par_iter().map(|&z| -quad.sum_at(g.values(), None, z) / PI).collect())
}

/// Discretized `T_{L,m}` and its adjoint on a fixed grid.
///
/// `T u = K ū` where `K[t][s] = -(1/π) L(z_t)^m c_s(z_t) B(ζ_s) / L(ζ_s)^{m+1}`
/// over the active sources `s` (nonzero `B`, outside the excision discs).
pub struct TOperator {
    quad: CauchyQuadrature,
    m: u32,
    /// `L^m` at every node.
    lm: Vec<C64>,
    /// `B / L^{m+1}` at every node, zero on excised nodes.
    b_weight: Vec<C64>,
    excised: Vec<bool>,
    active: Vec<usize>,
}

impl TOperator {
    pub fn new(grid: &Arc<Grid>, points: &[C64], m: u32, b: &GridField, opts: &TransformOptions) -> Result<Self> {
        opts.validate()?;
        if !b.grid().same_as(grid) {
            return Err(Error::GridMismatch);
        }
        let radius = opts.excision_factor * grid.h();
        let excised: Vec<bool> = grid.nodes.iter().map(|&z| points.iter().any(|&p| (z - p).norm() < radius)).collect();
        let lm: Vec<C64> = grid.nodes.iter().map(|&z| eval_L(points, z).powi(m as i32)).collect();
        let mut b_weight = Vec::with_capacity(grid.len());
        for (k, &z) in grid.nodes.iter().enumerate() {
            if excised[k] {
                b_weight.push(C64::new(0.0, 0.0));
                continue;
            }
            let w = b.values()[k] / eval_L(points, z).powi(m as i32 + 1);
            if !w.re.is_finite() || !w.im.is_finite() {
                return Err(Error::NonFinite { node: k, z });
            }
            b_weight.push(w);
        }
        let active = (0..grid.len()).filter(|&k| b_weight[k] != C64::new(0.0, 0.0)).collect();
        Ok(TOperator { quad: CauchyQuadrature::new(grid), m, lm, b_weight, excised, active })
    }

    pub fn from_spec(spec: &ProblemSpec, grid: &Arc<Grid>, opts: &TransformOptions) -> Result<Self> {
        let b = spec.b.sample(grid, &spec.locations())?;
        Self::new(grid, &spec.locations(), spec.m, &b, opts)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.quad.grid()
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Sources on which `T` depends.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn excised(&self) -> &[bool] {
        &self.excised
    }

    pub fn is_zero(&self) -> bool {
        self.active.is_empty()
    }

    #[inline]
    pub fn kernel(&self, t: usize, s: usize) -> C64 {
        let z = self.grid().nodes[t];
        -self.lm[t] * self.quad.coefficient(s, z) * self.b_weight[s] / PI
    }

    pub fn apply(&self, u: &GridField) -> Result<GridField> {
        if !u.grid().same_as(self.grid()) {
            return Err(Error::GridMismatch);
        }
        u.ensure_finite()?;
        let g: Vec<C64> = u.values().iter().zip(&self.b_weight).map(|(&x, &w)| w * x.conj()).collect();
        let active = &self.active;
        let values = self
            .grid()
            .nodes
            .par_iter()
            .enumerate()
            .map(|(t, &z)| if active.is_empty() { C64::new(0.0, 0.0) } else { -self.lm[t] * self.quad.sum_at(&g, Some(active), z) / PI })
            .collect();
        GridField::new(self.grid().clone(), values)
    }

    /// `T* v (ζ) = (B/L^{m+1})(ζ) · Π[L^m v̄](ζ)`, zero on excised nodes.
    pub fn apply_star(&self, v: &GridField) -> Result<GridField> {
        if !v.grid().same_as(self.grid()) {
            return Err(Error::GridMismatch);
        }
        v.ensure_finite()?;
        let g: Vec<C64> = v.values().iter().zip(&self.lm).map(|(&x, &l)| l * x.conj()).collect();
        let values = self
            .grid()
            .nodes
            .par_iter()
            .enumerate()
            .map(|(s, &z)| {
                let w = self.b_weight[s];
                if w == C64::new(0.0, 0.0) {
                    C64::new(0.0, 0.0)
                } else {
                    // ∫ g(z')/(z' - ζ) dA(z') is the transform kernel with roles swapped.
                    -w * self.quad.sum_at(&g, None, z) / PI
                }
            })
            .collect();
        GridField::new(self.grid().clone(), values)
    }

    /// Rows of `K` for the given targets restricted to the active sources.
    pub fn kernel_rows(&self, targets: &[usize]) -> Vec<Vec<C64>> {
        targets.par_iter().map(|&t| self.active.iter().map(|&s| self.kernel(t, s)).collect()).collect()
    }
}

/// `T_{L,m} u` for the spec's `B`, `L` and `m`.
#[allow(non_snake_case)]
pub fn apply_T(u: &GridField, spec: &ProblemSpec, opts: &TransformOptions) -> Result<GridField> {
    TOperator::from_spec(spec, u.grid(), opts)?.apply(u)
}

#[allow(non_snake_case)]
pub fn apply_T_star(v: &GridField, spec: &ProblemSpec, opts: &TransformOptions) -> Result<GridField> {
    TOperator::from_spec(spec, v.grid(), opts)?.apply_star(v)
}

/// `f = L^m Π[F / L^m]`, so that `∂f/∂z̄ = F`.
pub fn build_f(f_src: &GridField, points: &[C64], m: u32, opts: &TransformOptions) -> Result<GridField> {
    let grid = f_src.grid();
    weighted_norm_E(f_src, m, 1.0, points)?;
    let g = GridField::new(grid.clone(), f_src.values().iter().zip(&grid.nodes).map(|(&v, &z)| v / eval_L(points, z).powi(m as i32)).collect())?;
    let pi_g = pompeiu(&g, opts)?;
    Ok(pi_g.map(|v, z| v * eval_L(points, z).powi(m as i32)))
}

/// `build_f` with `F` sampled from the spec.
pub fn build_f_from_spec(spec: &ProblemSpec, grid: &Arc<Grid>, opts: &TransformOptions) -> Result<GridField> {
    let c = sample_coefficients(spec, grid)?;
    build_f(&c.f, &spec.locations(), spec.m, opts)
}

/// `⟨φ, ψ⟩ = Re ∫ φ ψ̄`.
pub fn bilinear_form(phi: &GridField, psi: &GridField) -> Result<f64> {
    phi.check_same_grid(psi)?;
    Ok(phi.values().iter().zip(psi.values()).zip(&phi.grid().weights).map(|((&a, &b), &w)| w * (a * b.conj()).re).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientField, PointInput};
    use crate::field::wirtinger_dbar;
    use crate::grid::{make_grid, Domain};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn disc(n: usize) -> Arc<Grid> {
        Arc::new(make_grid(&Domain::disc(c(0.0, 0.0), 1.0).unwrap(), n, &[], None).unwrap())
    }

    #[test]
    fn pompeiu_of_one_on_disc() {
        let g = disc(64);
        let one = GridField::constant(&g, c(1.0, 0.0));
        let opts = TransformOptions::default();
        let v = pompeiu_at(&one, &[c(0.3, 0.1), c(2.0, 0.0)], &opts).unwrap();
        assert!((v[0] - c(0.3, -0.1)).norm() < 2e-3, "{}", v[0]);
        assert!((v[1] - c(0.5, 0.0)).norm() < 2e-3, "{}", v[1]);
    }

    #[test]
    fn pompeiu_inverse_on_disc() {
        let g = disc(64);
        let f = GridField::from_fn(&g, |z| z.conj());
        let p = pompeiu(&f, &TransformOptions::default()).unwrap();
        let d = wirtinger_dbar(&p).unwrap();
        let nodes: Vec<usize> = d.nodes.iter().copied().filter(|&k| g.nodes[k].norm() < 0.8).collect();
        let err = d.max_error_against(|_, z| z.conj(), &nodes);
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn first_order_rule_runs() {
        let g = disc(32);
        let f = GridField::from_fn(&g, |z| z * z);
        let a = pompeiu(&f, &TransformOptions::default()).unwrap();
        let b = pompeiu(&f, &TransformOptions { self_cell: SelfCellRule::FirstOrderCorrect, ..Default::default() }).unwrap();
        let diff = a.sub(&b).unwrap().max_abs();
        assert!(diff > 0.0 && diff < 0.05);
    }

    fn spec_with_b(b: CoefficientField, m: u32, domain: Domain) -> ProblemSpec {
        ProblemSpec::new(domain, vec![PointInput::at(c(0.0, 0.0)).delta(0.2)], CoefficientField::zero(), b, CoefficientField::zero(), m).unwrap()
    }

    #[test]
    fn t_trivial_cases() {
        let s = spec_with_b(CoefficientField::zero(), 1, Domain::square(1.0));
        let g = Arc::new(make_grid(&s.domain, 24, &[c(0.0, 0.0)], Some(Default::default())).unwrap());
        let u = GridField::from_fn(&g, |z| z * z);
        assert_eq!(apply_T(&u, &s, &TransformOptions::default()).unwrap().max_abs(), 0.0);
        let s = spec_with_b(CoefficientField::constant(c(1.0, 0.0)), 1, Domain::square(1.0));
        assert_eq!(apply_T(&GridField::zeros(&g), &s, &TransformOptions::default()).unwrap().max_abs(), 0.0);
        assert_eq!(apply_T_star(&GridField::zeros(&g), &s, &TransformOptions::default()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn conjugate_linear() {
        let s = spec_with_b(CoefficientField::function(|z| c(1.0, 0.5) + z), 1, Domain::square(1.0));
        let g = Arc::new(make_grid(&s.domain, 20, &[c(0.0, 0.0)], Some(Default::default())).unwrap());
        let op = TOperator::from_spec(&s, &g, &TransformOptions::default()).unwrap();
        let u = GridField::from_fn(&g, |z| (z * c(0.3, 1.0)).exp() * z * z);
        let tu = op.apply(&u).unwrap();
        for lam in [c(0.0, 1.0), c(2.0, 0.0), c(1.0, 1.0)] {
            let tl = op.apply(&u.scale(lam)).unwrap();
            let want = tu.scale(lam.conj());
            let err = tl.sub(&want).unwrap().max_abs();
            assert!(err <= 1e-12 * tu.max_abs().max(1.0), "{err}");
        }
    }

    #[test]
    fn adjoint_sign() {
        let s = spec_with_b(CoefficientField::function(|z| c(1.0, 0.5) + z * z.conj()), 1, Domain::square(1.0));
        let g = Arc::new(make_grid(&s.domain, 32, &[c(0.0, 0.0)], Some(Default::default())).unwrap());
        let op = TOperator::from_spec(&s, &g, &TransformOptions::default()).unwrap();
        let u = GridField::from_fn(&g, |z| z * z * (z + c(0.2, -0.1)));
        let v = GridField::from_fn(&g, |z| (z * c(0.5, 0.3)).exp() + z.conj());
        let lhs = bilinear_form(&op.apply(&u).unwrap(), &v).unwrap();
        let rhs = bilinear_form(&u, &op.apply_star(&v).unwrap()).unwrap();
        assert!((lhs + rhs).abs() <= 1e-3 * lhs.abs(), "{lhs} {rhs}");
    }

    #[test]
    fn bilinear_examples() {
        let g = Arc::new(make_grid(&Domain::rectangle(c(0.0, 0.0), c(1.0, 1.0)).unwrap(), 16, &[], None).unwrap());
        let one = GridField::constant(&g, c(1.0, 0.0));
        assert!((bilinear_form(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        assert!(bilinear_form(&GridField::constant(&g, c(0.0, 1.0)), &one).unwrap().abs() < 1e-15);
        let g = Arc::new(make_grid(&Domain::square(1.0), 64, &[], None).unwrap());
        let z = GridField::from_fn(&g, |z| z);
        // midpoint error is O(h²)
        assert!((bilinear_form(&z, &z).unwrap() - 8.0 / 3.0).abs() < 2e-3);
    }

    #[test]
    fn build_f_examples() {
        let g = disc(64);
        let pts = [c(0.0, 0.0)];
        let zero = GridField::zeros(&g);
        assert_eq!(build_f(&zero, &pts, 1, &TransformOptions::default()).unwrap().max_abs(), 0.0);
        let f_src = GridField::from_fn(&g, |z| z);
        let f = build_f(&f_src, &pts, 1, &TransformOptions::default()).unwrap();
        let err = g.nodes.iter().zip(f.values()).filter(|(z, _)| z.norm() < 0.8).map(|(&z, &v)| (v - z * z.conj()).norm()).fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
    }
}
