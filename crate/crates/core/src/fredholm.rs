//! Second-kind solve of `u - T u + Σ c_k h_k = f`, kernel detection, and the
//! full pipeline for `∂u/∂z̄ = (A/L)u + (B/L)ū + F`.
//!
//! `T` only reads `u` on its active sources (nonzero `B` outside the
//! excision discs), so the equation is first solved on those nodes and the
//! solution is then extended everywhere by `u = f + T u - Σ c_k h_k`.

use std::str::FromStr;
use std::sync::Arc;

use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cauchy::{build_f, TOperator, TransformOptions};
use crate::coefficients::{eval_L, eval_M_with, sample_coefficients, weighted_norm_E, ProblemSpec};
use crate::error::{Error, Result};
use crate::field::{holder_estimate, wirtinger_dbar, GridField};
use crate::grid::Grid;
use crate::reduction::{reduce, unreduce, ReductionResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Picard,
    Dense,
    #[default]
    Auto,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "picard" => Ok(Method::Picard),
            "dense" => Ok(Method::Dense),
            "auto" => Ok(Method::Auto),
            _ => Err(Error::Invalid(format!("unknown method '{s}' (expected picard, dense or auto)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: Method,
    /// Relative step size at which Picard iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Singular values below `sv_cutoff · σ_max` count as kernel.
    pub sv_cutoff: f64,
    /// Number of holomorphic corrections `h_k = L^m z^{k-1}`.
    pub n_h: usize,
    /// Largest realified system solved by LU.
    pub dense_cap: usize,
    /// Largest realified system decomposed by SVD.
    pub svd_cap: usize,
    /// Picard is chosen by `auto` when the estimated norm of `T` is below this.
    pub picard_threshold: f64,
    pub transform: TransformOptions,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Auto,
            tolerance: 1e-12,
            max_iterations: 500,
            sv_cutoff: 1e-6,
            n_h: 8,
            dense_cap: 7000,
            svd_cap: 3200,
            picard_threshold: 0.9,
            transform: TransformOptions::default(),
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Invalid("tolerance must be positive".into()));
        }
        if !(self.sv_cutoff > 0.0 && self.sv_cutoff < 1.0) {
            return Err(Error::Invalid("singular-value cutoff must lie in (0,1)".into()));
        }
        self.transform.validate()
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveReport {
    pub method: String,
    /// `‖u - Tu + Σ c_k h_k - f‖_{m,p}`.
    pub integral_residual: f64,
    /// Sup of `|∂z̄u - (A/L)u - (B/L)ū - F|` over verification nodes.
    pub pde_residual_sup: Option<f64>,
    /// Same, weighted by `min(1, min_j |z - z_j|)`.
    pub pde_residual_weighted: Option<f64>,
    pub kernel_dim: Option<usize>,
    pub c: Vec<f64>,
    pub iterations: usize,
    /// Power-iteration estimate of `‖T‖` on the active nodes.
    pub rho: f64,
    /// Per-step contraction factors of the Picard iteration.
    pub picard_ratios: Vec<f64>,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub active_nodes: usize,
    pub norm_u_over_m: Option<f64>,
    pub holder_u_over_m: Option<f64>,
}

/// `K ū` restricted to active targets and sources, assembled when small.
struct ActiveOperator<'a> {
    op: &'a TOperator,
    dense: Option<Vec<Vec<C64>>>,
}

impl<'a> ActiveOperator<'a> {
    const ASSEMBLE_LIMIT: usize = 3500;

    fn new(op: &'a TOperator) -> Self {
        let dense = (op.active().len() <= Self::ASSEMBLE_LIMIT).then(|| op.kernel_rows(op.active()));
        ActiveOperator { op, dense }
    }

    fn apply(&self, u: &[C64]) -> Vec<C64> {
        let conj: Vec<C64> = u.iter().map(|v| v.conj()).collect();
        match &self.dense {
            Some(rows) => rows.iter().map(|row| row.iter().zip(&conj).map(|(&k, &x)| k * x).sum()).collect(),
            None => {
                use rayon::prelude::*;
                let act = self.op.active();
                act.par_iter().map(|&t| act.iter().zip(&conj).map(|(&s, &x)| self.op.kernel(t, s) * x).sum()).collect()
            }
        }
    }
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Power iteration for `‖T‖` restricted to the active nodes.
fn estimate_rho(aop: &ActiveOperator, start: &[C64], seed: u64) -> f64 {
    let n = start.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<C64> = (0..n).map(|k| start[k] + C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let mut rho = 0.0;
    for _ in 0..12 {
        let nx = norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = aop.apply(&x);
        rho = norm2(&y);
        x = y;
    }
    rho
}

fn realify(v: &[C64]) -> Mat<f64> {
    let n = v.len();
    Mat::from_fn(2 * n, 1, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

fn complexify(x: &Mat<f64>, n: usize) -> Vec<C64> {
    (0..n).map(|i| C64::new(x[(i, 0)], x[(i + n, 0)])).collect()
}

/// Realified `I - T` on the active nodes, `[[I-Kr, -Ki], [-Ki, I+Kr]]`,
/// conjugated by `D^{1/2}` with `D` the quadrature weights so that singular
/// values approximate those of the operator on `L²`.
fn realified_p(rows: &[Vec<C64>], sqrt_w: &[f64]) -> Mat<f64> {
    let n = rows.len();
    Mat::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let k = rows[ii][jj] * (sqrt_w[ii] / sqrt_w[jj]);
        let id = if ii == jj { 1.0 } else { 0.0 };
        match (bi, bj) {
            (0, 0) => id - k.re,
            (0, 1) | (1, 0) => -k.im,
            _ => id + k.re,
        }
    })
}

fn active_sqrt_weights(grid: &Grid, act: &[usize]) -> Vec<f64> {
    act.iter().map(|&k| grid.weights[k].sqrt()).collect()
}

fn scaled(v: &[C64], by: &[f64]) -> Vec<C64> {
    v.iter().zip(by).map(|(&x, &s)| x * s).collect()
}

fn unscaled(v: &[C64], by: &[f64]) -> Vec<C64> {
    v.iter().zip(by).map(|(&x, &s)| x / s).collect()
}

fn mat_vec(a: &Mat<f64>, x: &Mat<f64>) -> Mat<f64> {
    a * x
}

fn col_norm(x: &Mat<f64>) -> f64 {
    (0..x.nrows()).map(|i| x[(i, 0)] * x[(i, 0)]).sum::<f64>().sqrt()
}

/// `σ_max` by power iteration on `PᵀP` and `σ_min` by inverse iteration
/// with the LU factors.
fn sigma_estimates(p: &Mat<f64>, lu: &faer::linalg::solvers::PartialPivLu<f64>, seed: u64) -> (f64, f64) {
    let n = p.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut x = Mat::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
    let mut smax = 0.0;
    for _ in 0..20 {
        let nx = col_norm(&x);
        x *= 1.0 / nx;
        let y = mat_vec(p, &x);
        smax = col_norm(&y);
        x = p.transpose() * &y;
    }
    let mut x = Mat::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
    let mut smin = f64::INFINITY;
    for _ in 0..12 {
        let nx = col_norm(&x);
        x *= 1.0 / nx;
        lu.solve_transpose_in_place(&mut x);
        lu.solve_in_place(&mut x);
        let g = col_norm(&x);
        if !g.is_finite() || g == 0.0 {
            return (smax, 0.0);
        }
        smin = (1.0 / g).sqrt();
    }
    (smax, smin)
}

/// Holomorphic corrections `h_k = L^m z^{k-1}` at every node.
pub fn holomorphic_basis(grid: &Grid, points: &[C64], m: u32, n_h: usize) -> Vec<Vec<C64>> {
    (0..n_h).map(|k| grid.nodes.iter().map(|&z| eval_L(points, z).powi(m as i32) * z.powi(k as i32)).collect()).collect()
}

/// Solves `u - T u + Σ c_k h_k = f` with real `c_k`.
///
/// `c = 0` unless the realified `I - T` is numerically singular, in which
/// case the component of `f` outside its range is matched by the `h_k` in
/// the least-squares sense and `u` is the minimal-norm solution.
#[allow(non_snake_case)]
pub fn solve_P(f: &GridField, op: &TOperator, points: &[C64], p: f64, opts: &SolverOptions) -> Result<(GridField, SolveReport)> {
    opts.validate()?;
    if !f.grid().same_as(op.grid()) {
        return Err(Error::GridMismatch);
    }
    f.ensure_finite()?;
    let grid = op.grid().clone();
    let m = op.m();
    let mut report = SolveReport { active_nodes: op.active().len(), ..Default::default() };
    if op.is_zero() {
        report.method = "identity".into();
        report.kernel_dim = Some(0);
        return Ok((f.clone(), report));
    }
    let act = op.active().to_vec();
    let na = act.len();
    let fa: Vec<C64> = act.iter().map(|&k| f.values()[k]).collect();
    let aop = ActiveOperator::new(op);
    report.rho = estimate_rho(&aop, &fa, opts.seed);

    let use_picard = match opts.method {
        Method::Picard => true,
        Method::Dense => false,
        Method::Auto => report.rho < opts.picard_threshold,
    };
    let mut solution: Option<(Vec<C64>, Vec<f64>)> = None;
    if use_picard {
        let mut u = fa.clone();
        let mut prev_step = f64::NAN;
        let mut best = f64::INFINITY;
        for it in 1..=opts.max_iterations {
            let tu = aop.apply(&u);
            let next: Vec<C64> = fa.iter().zip(&tu).map(|(&a, &b)| a + b).collect();
            let step = norm2(&next.iter().zip(&u).map(|(&a, &b)| a - b).collect::<Vec<_>>());
            let scale = norm2(&next).max(f64::MIN_POSITIVE);
            if prev_step.is_finite() && prev_step > 0.0 {
                report.picard_ratios.push(step / prev_step);
            }
            prev_step = step;
            u = next;
            best = best.min(step / scale);
            report.iterations = it;
            if step <= opts.tolerance * scale {
                solution = Some((u.clone(), Vec::new()));
                report.method = "picard".into();
                break;
            }
            if !step.is_finite() {
                break;
            }
        }
        if solution.is_none() && opts.method == Method::Picard {
            return Err(Error::NotConverged { residual: best });
        }
    }
    if solution.is_none() {
        if 2 * na > opts.dense_cap {
            return Err(Error::TooLarge { size: 2 * na, cap: opts.dense_cap });
        }
        let rows = match &aop.dense {
            Some(r) => r.clone(),
            None => op.kernel_rows(&act),
        };
        let sw = active_sqrt_weights(&grid, &act);
        let pm = realified_p(&rows, &sw);
        let lu = pm.partial_piv_lu();
        let (smax, smin) = sigma_estimates(&pm, &lu, opts.seed);
        report.sigma_max = Some(smax);
        report.sigma_min = Some(smin);
        report.method = "dense".into();
        if smin > opts.sv_cutoff.sqrt() * smax {
            let mut x = realify(&scaled(&fa, &sw));
            lu.solve_in_place(&mut x);
            report.kernel_dim = Some(0);
            solution = Some((unscaled(&complexify(&x, na), &sw), Vec::new()));
        } else {
            if 2 * na > opts.svd_cap {
                return Err(Error::TooLarge { size: 2 * na, cap: opts.svd_cap });
            }
            let h = holomorphic_basis(&grid, points, m, opts.n_h);
            let ha: Vec<Vec<C64>> = h.iter().map(|col| scaled(&act.iter().map(|&k| col[k]).collect::<Vec<_>>(), &sw)).collect();
            let (ua, c, kdim, s_min) = corrected_least_squares(&pm, &scaled(&fa, &sw), &ha, opts.sv_cutoff)?;
            report.kernel_dim = Some(kdim);
            report.sigma_min = Some(s_min);
            solution = Some((unscaled(&ua, &sw), c));
        }
    }
    let (ua, c) = solution.expect("one of the methods produced a solution");
    report.c = c.clone();

    let mut full = vec![C64::new(0.0, 0.0); grid.len()];
    for (i, &k) in act.iter().enumerate() {
        full[k] = ua[i];
    }
    let tu = op.apply(&GridField::new(grid.clone(), full)?)?;
    let h = if c.is_empty() { Vec::new() } else { holomorphic_basis(&grid, points, m, c.len()) };
    let hc = |k: usize| -> C64 { h.iter().zip(&c).map(|(col, &ck)| ck * col[k]).sum() };
    let u = GridField::new(grid.clone(), (0..grid.len()).map(|k| f.values()[k] + tu.values()[k] - hc(k)).collect())?;
    u.ensure_finite()?;
    let tu2 = op.apply(&u)?;
    let defect = GridField::new(grid.clone(), (0..grid.len()).map(|k| u.values()[k] - tu2.values()[k] + hc(k) - f.values()[k]).collect())?;
    report.integral_residual = weighted_norm_E(&defect, m, p, points)?;
    Ok((u, report))
}

/// Least squares `min ‖P x + H c - f‖` with `x` of minimal norm over the
/// numerical kernel. Returns `(x, c, kernel dimension, σ_min)`.
fn corrected_least_squares(pm: &Mat<f64>, fa: &[C64], ha: &[Vec<C64>], cutoff: f64) -> Result<(Vec<C64>, Vec<f64>, usize, f64)> {
    let n = pm.nrows();
    let na = n / 2;
    let svd = pm.svd().map_err(|e| Error::Invalid(format!("SVD failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let sv: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let kdim = kernel_count(&sv, cutoff);
    let rank = n - kdim;
    let u_mat = svd.U();
    let v_mat = svd.V();
    let f = realify(fa);
    let hs: Vec<Mat<f64>> = ha.iter().map(|h| realify(h)).collect();
    // Cokernel projections: solve (U₀ᵀ H) c = U₀ᵀ f in least squares.
    let mut c = vec![0.0; hs.len()];
    if kdim > 0 && !hs.is_empty() {
        let u0 = u_mat.subcols(rank, kdim);
        let a = Mat::from_fn(kdim, hs.len(), |i, j| (0..n).map(|r| u0[(r, i)] * hs[j][(r, 0)]).sum::<f64>());
        let b = Mat::from_fn(kdim, 1, |i, _| (0..n).map(|r| u0[(r, i)] * f[(r, 0)]).sum::<f64>());
        let small = a.svd().map_err(|e| Error::Invalid(format!("SVD failed: {e:?}")))?;
        let ss = small.S().column_vector();
        let tol = 1e-12 * ss[0].max(f64::MIN_POSITIVE);
        for (k, ck) in c.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..ss.nrows() {
                if ss[i] > tol {
                    let ub: f64 = (0..kdim).map(|r| small.U()[(r, i)] * b[(r, 0)]).sum();
                    acc += small.V()[(k, i)] * ub / ss[i];
                }
            }
            *ck = acc;
        }
    }
    let mut rhs = f.clone();
    for (h, &ck) in hs.iter().zip(&c) {
        for r in 0..n {
            rhs[(r, 0)] -= ck * h[(r, 0)];
        }
    }
    let mut x = Mat::<f64>::zeros(n, 1);
    for i in 0..rank {
        let coef: f64 = (0..n).map(|r| u_mat[(r, i)] * rhs[(r, 0)]).sum::<f64>() / s[i];
        for r in 0..n {
            x[(r, 0)] += coef * v_mat[(r, i)];
        }
    }
    let smin = s[n - 1];
    Ok((complexify(&x, na), c, kdim, smin))
}

/// Minimum ratio between the kernel cluster and the rest of the spectrum.
const KERNEL_GAP: f64 = 100.0;

/// Numerical kernel dimension from singular values sorted in decreasing order.
///
/// Values below `cutoff · σ_max` always count. If the values below
/// `√cutoff · σ_max` contain a jump of at least [`KERNEL_GAP`], the cluster
/// beneath the widest such jump is the kernel instead, so a cluster that is
/// still converging to zero is counted at every resolution.
pub fn kernel_count(sv: &[f64], cutoff: f64) -> usize {
    let Some(&smax) = sv.first() else { return 0 };
    let n = sv.len();
    let plain = sv.iter().filter(|&&s| s <= cutoff * smax).count();
    let band = sv.iter().filter(|&&s| s <= cutoff.sqrt() * smax).count();
    let start = n - band;
    let mut best = (0.0, 0);
    for i in start.max(1)..n {
        let ratio = sv[i - 1] / sv[i].max(f64::MIN_POSITIVE);
        if ratio > best.0 {
            best = (ratio, n - i);
        }
    }
    if best.0 >= KERNEL_GAP {
        best.1.max(plain)
    } else {
        plain
    }
}

/// Kernel of the discretized `I - T`: singular vectors under [`kernel_count`],
/// extended to all nodes by `u = T u`.
pub fn kernel_basis(op: &TOperator, opts: &SolverOptions) -> Result<(Vec<GridField>, Vec<f64>)> {
    opts.validate()?;
    let grid = op.grid().clone();
    if op.is_zero() {
        return Ok((Vec::new(), Vec::new()));
    }
    let act = op.active().to_vec();
    let n = 2 * act.len();
    if n > opts.svd_cap {
        return Err(Error::TooLarge { size: n, cap: opts.svd_cap });
    }
    let sw = active_sqrt_weights(&grid, &act);
    let pm = realified_p(&op.kernel_rows(&act), &sw);
    let svd = pm.svd().map_err(|e| Error::Invalid(format!("SVD failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let sv: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let mut basis = Vec::new();
    for i in n - kernel_count(&sv, opts.sv_cutoff)..n {
        let x = Mat::from_fn(n, 1, |r, _| svd.V()[(r, i)]);
        let ua = unscaled(&complexify(&x, act.len()), &sw);
        let mut full = vec![C64::new(0.0, 0.0); grid.len()];
        for (j, &k) in act.iter().enumerate() {
            full[k] = ua[j];
        }
        let u = op.apply(&GridField::new(grid.clone(), full)?)?;
        basis.push(u);
    }
    Ok((basis, sv))
}

/// Relative defect `‖u - T u‖ / ‖u‖` (Euclidean over all nodes).
pub fn relative_defect(op: &TOperator, u: &GridField) -> Result<f64> {
    let tu = op.apply(u)?;
    let num: f64 = u.values().iter().zip(tu.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = u.values().iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Residual of `∂u/∂z̄ = (A/L)u + (B/L)ū + F` on verification nodes:
/// `(sup, sup weighted by min(1, min_j |z - z_j|))`.
pub fn pde_residual(u: &GridField, a_over_l: &GridField, b_over_l: &GridField, f: &GridField, exclusion: f64) -> Result<(f64, f64)> {
    let grid = u.grid();
    let d = wirtinger_dbar(u)?;
    let ver = grid.verification_nodes(exclusion);
    let mut sup = 0.0f64;
    let mut weighted = 0.0f64;
    for (&k, &dv) in d.nodes.iter().zip(&d.values) {
        if ver.binary_search(&k).is_err() {
            continue;
        }
        let uk = u.values()[k];
        let r = (dv - a_over_l.values()[k] * uk - b_over_l.values()[k] * uk.conj() - f.values()[k]).norm();
        sup = sup.max(r);
        weighted = weighted.max(r * grid.singular_distance(grid.nodes[k]).min(1.0));
    }
    Ok((sup, weighted))
}

pub struct CrSolution {
    pub u: GridField,
    /// Solution of the reduced equation (`u = e^w v`).
    pub v: GridField,
    pub f: GridField,
    pub reduction: Option<ReductionResult>,
    pub report: SolveReport,
}

/// Full pipeline: reduce `A`, build `f`, solve the integral equation, undo
/// the reduction, and measure the PDE residual.
#[allow(non_snake_case)]
pub fn solve_CR(spec: &ProblemSpec, grid: &Arc<Grid>, opts: &SolverOptions) -> Result<CrSolution> {
    let locs = spec.locations();
    let coeffs = sample_coefficients(spec, grid)?;
    let (b1, f1, reduction) = if spec.a.is_zero() {
        (coeffs.b.clone(), coeffs.f.clone(), None)
    } else {
        let (_, res) = reduce(spec, grid, &opts.transform)?;
        (res.b1.clone(), res.f1.clone(), Some(res))
    };
    let f = build_f(&f1, &locs, spec.m, &opts.transform)?;
    let op = TOperator::new(grid, &locs, spec.m, &b1, &opts.transform)?;
    let (v, mut report) = solve_P(&f, &op, &locs, spec.p, opts)?;
    let u = match &reduction {
        Some(r) => unreduce(&v, r)?,
        None => v.clone(),
    };
    let (sup, weighted) = pde_residual(&u, &coeffs.a_over_l, &coeffs.b_over_l, &coeffs.f, grid.default_exclusion())?;
    report.pde_residual_sup = Some(sup);
    report.pde_residual_weighted = Some(weighted);

    let gammas = spec.gammas_eff();
    let u_over_m = u.map(|x, z| match eval_M_with(&locs, &gammas, z) {
        Ok(mv) if mv != C64::new(0.0, 0.0) => x / mv,
        _ => C64::new(0.0, 0.0),
    });
    report.norm_u_over_m = weighted_norm_E(&u_over_m, spec.m, spec.p, &locs).ok();
    let excl = grid.exclusion_discs(grid.default_exclusion());
    report.holder_u_over_m = holder_estimate(&u_over_m, 20_000, &excl, opts.seed).ok();
    Ok(CrSolution { u, v, f, reduction, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientField, PointInput};
    use crate::grid::{make_grid, Domain, RingSpec};

    #[test]
    fn kernel_count_uses_clear_gaps() {
        let cut = 1e-6;
        assert_eq!(kernel_count(&[1.0, 0.5, 0.1], cut), 0);
        assert_eq!(kernel_count(&[1.0, 0.5, 1e-8], cut), 1);
        // cluster above the cutoff but well separated
        assert_eq!(kernel_count(&[1.0, 0.1, 3e-4, 2e-4], cut), 2);
        // no clear gap inside the band
        assert_eq!(kernel_count(&[1.0, 1e-2, 1e-3, 5e-4, 2e-4], cut), 0);
        assert_eq!(kernel_count(&[], cut), 0);
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bump_b(amp: C64, radius: f64) -> CoefficientField {
        CoefficientField::function(move |z| amp * crate::cutoff::beta(2.0 * z.norm() / radius))
    }

    fn setup(amp: C64, n: usize, m: u32) -> (ProblemSpec, Arc<Grid>) {
        let s = ProblemSpec::new(
            Domain::square(1.0),
            vec![PointInput::at(c(0.0, 0.0)).delta(0.2)],
            CoefficientField::zero(),
            bump_b(amp, 0.35),
            CoefficientField::zero(),
            m,
        )
        .unwrap();
        let g = Arc::new(make_grid(&s.domain, n, &[c(0.0, 0.0)], Some(RingSpec::default())).unwrap());
        (s, g)
    }

    #[test]
    fn zero_b_is_identity() {
        let s = ProblemSpec::new(
            Domain::square(1.0),
            vec![PointInput::at(c(0.0, 0.0))],
            CoefficientField::zero(),
            CoefficientField::zero(),
            CoefficientField::zero(),
            1,
        )
        .unwrap();
        let g = Arc::new(make_grid(&s.domain, 16, &[c(0.0, 0.0)], None).unwrap());
        let op = TOperator::from_spec(&s, &g, &TransformOptions::default()).unwrap();
        let f = GridField::from_fn(&g, |z| z * z.conj());
        let (u, rep) = solve_P(&f, &op, &[c(0.0, 0.0)], 4.0, &SolverOptions::default()).unwrap();
        assert_eq!(u.values(), f.values());
        assert_eq!(rep.kernel_dim, Some(0));
        assert!(kernel_basis(&op, &SolverOptions::default()).unwrap().0.is_empty());
    }

    #[test]
    fn manufactured_dense_recovery() {
        let (s, g) = setup(c(1.0, 0.5), 32, 1);
        let pts = s.locations();
        let op = TOperator::from_spec(&s, &g, &TransformOptions::default()).unwrap();
        let ustar = GridField::from_fn(&g, |z| eval_L(&pts, z).powi(2));
        let f = ustar.sub(&op.apply(&ustar).unwrap()).unwrap();
        let (u, rep) = solve_P(&f, &op, &pts, 4.0, &SolverOptions::default().with_method(Method::Dense)).unwrap();
        let err = u.sub(&ustar).unwrap().max_abs();
        assert!(err < 1e-6, "{err} {rep:?}");
        assert!(rep.integral_residual < 1e-8);
        assert_eq!(rep.kernel_dim, Some(0));
    }

    #[test]
    fn near_kernel_is_detected_at_coarse_resolution() {
        let (s, g) = setup(c(3.0, 1.0), 32, 1);
        let pts = s.locations();
        let op = TOperator::from_spec(&s, &g, &TransformOptions::default()).unwrap();
        let (basis, _) = kernel_basis(&op, &SolverOptions::default()).unwrap();
        assert_eq!(basis.len(), 3);
        let f = GridField::from_fn(&g, |z| (z * c(0.5, 0.2)).exp());
        let (_, rep) = solve_P(&f, &op, &pts, 4.0, &SolverOptions::default().with_method(Method::Dense)).unwrap();
        assert_eq!(rep.kernel_dim, Some(3));
        assert!(rep.integral_residual < 1e-6, "{rep:?}");
    }

    #[test]
    fn picard_matches_dense_for_small_b() {
        let (s, g) = setup(c(0.1, 0.0), 32, 1);
        let pts = s.locations();
        let op = TOperator::from_spec(&s, &g, &TransformOptions::default()).unwrap();
        let f = GridField::from_fn(&g, |z| (z * c(0.5, 0.2)).exp());
        let (a, ra) = solve_P(&f, &op, &pts, 4.0, &SolverOptions::default().with_method(Method::Picard)).unwrap();
        let (b, _) = solve_P(&f, &op, &pts, 4.0, &SolverOptions::default().with_method(Method::Dense)).unwrap();
        assert!(ra.rho < 1.0);
        let rel = a.sub(&b).unwrap().max_abs() / b.max_abs();
        assert!(rel < 1e-6, "{rel}");
        for r in &ra.picard_ratios {
            assert!(*r <= ra.rho + 0.1, "{r} vs {}", ra.rho);
        }
        let (basis, _) = kernel_basis(&op, &SolverOptions::default()).unwrap();
        assert!(basis.is_empty());
    }

    #[test]
    fn pompeiu_case_pipeline() {
        let s = ProblemSpec::new(
            Domain::disc(c(0.0, 0.0), 1.0).unwrap(),
            vec![PointInput::at(c(0.0, 0.0)).delta(0.2)],
            CoefficientField::zero(),
            CoefficientField::zero(),
            CoefficientField::constant(c(1.0, 0.0)),
            0,
        )
        .unwrap();
        let g = Arc::new(make_grid(&s.domain, 48, &[c(0.0, 0.0)], Some(RingSpec::default())).unwrap());
        let sol = solve_CR(&s, &g, &SolverOptions::default()).unwrap();
        assert!(sol.report.pde_residual_sup.unwrap() < 1e-2, "{:?}", sol.report);
    }
}
