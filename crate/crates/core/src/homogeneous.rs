//! Nontrivial solutions of `∂u/∂z̄ = (A/L)u + (B/L)ū` vanishing to a
//! prescribed order, glued from model solutions at each singular point.
//!
//! Near `z_j` the equation looks like `v_z̄ = Q_j(θ) v̄ / r`, whose separated
//! solutions `r^λ f(θ)` come from [`crate::model`]. With cutoffs `φ_j`
//! (`1` on `D(z_j, ε)`, `0` outside `D(z_j, 2ε)`) the ansatz
//! `u = w + Σ φ_j v_j` leaves `∂w/∂z̄ = (B/L)w̄ + F` with
//! `F = Σ [φ_j((B/L)v̄_j - ∂z̄v_j) - v_j ∂z̄φ_j]`, solved by [`solve_CR`].

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::cauchy::{build_f, TOperator};
use crate::coefficients::{sample_coefficients, CoefficientField, ProblemSpec};
use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::fredholm::{pde_residual, solve_CR, solve_P, SolveReport, SolverOptions};
use crate::grid::Grid;
use crate::model::{find_exponents, model_value, ModelExponent, ModelOptions};
use crate::profile::{angle_of, PeriodicProfile};
use crate::reduction::{checked_cutoffs, reduce, unreduce};

/// When to remove the defect of a model solution by a local solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    /// Only when the defect on `D(z_j, 2ε)` is not negligible.
    #[default]
    Auto,
    Always,
    Never,
}

const ORDER_SECTORS: usize = 32;

/// Defects below this (relative to `max |v_j|` on the disc) count as zero.
const DEFECT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct HomogeneousOptions {
    /// Prescribed vanishing order.
    pub a: f64,
    /// Requested smoothness; the cutoffs used are `C^∞`.
    pub k: u32,
    /// Glue radius.
    pub epsilon: f64,
    /// Scan limit for the model exponents; defaults to `a + 2`.
    pub lambda_max: Option<f64>,
    /// Weight exponent of the global solve; defaults to `⌈a⌉ + 1`.
    pub m: Option<u32>,
    pub correction: Correction,
    pub max_retries: usize,
    pub solver: SolverOptions,
    pub model: ModelOptions,
}

impl HomogeneousOptions {
    pub fn new(a: f64, epsilon: f64) -> Self {
        HomogeneousOptions {
            a,
            k: 0,
            epsilon,
            lambda_max: None,
            m: None,
            correction: Correction::Auto,
            max_retries: 3,
            solver: SolverOptions::default(),
            model: ModelOptions::default(),
        }
    }

    pub fn weight_exponent(&self) -> u32 {
        self.m.unwrap_or(self.a.ceil().max(0.0) as u32 + 1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::Invalid(format!("vanishing order must be positive, got {}", self.a)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Invalid(format!("glue radius must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Model solution at one singular point, possibly corrected.
#[derive(Clone, Debug)]
pub struct LocalSolution {
    pub point: usize,
    pub center: C64,
    pub exponent: ModelExponent,
    /// `Q_j(θ)` of the model equation.
    pub model_profile: PeriodicProfile,
    pub values: GridField,
    /// `(B/L) v̄ - ∂z̄v` on `D(z_j, 2ε)`; zero once corrected.
    pub defect: GridField,
    pub corrected: bool,
}

/// `∂z̄v` of `v = r^λ f(θ)` from the model equation: `Q(θ) v̄ / r`.
fn model_dbar(q: &PeriodicProfile, center: C64, z: C64, v: C64) -> C64 {
    let w = z - center;
    let r = w.norm();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    q.eval(angle_of(w)) * v.conj() / r
}

/// Model solution with the smallest exponent `≥ a` at point `j`.
///
/// With `correction = Some(ε)` the defect `G_j = (B/L)v̄_j - ∂z̄v_j` on
/// `D(z_j, 2ε)` is removed by solving `∂z̄w = (B/L)w̄ + G_j` with both
/// coefficients restricted to that disc, and `v_j + w` is returned.
pub fn local_solution(
    spec: &ProblemSpec,
    grid: &Arc<Grid>,
    b_over_l: &GridField,
    j: usize,
    opts: &HomogeneousOptions,
    correction: Option<f64>,
) -> Result<LocalSolution> {
    let point = spec.points.get(j).ok_or_else(|| Error::Invalid(format!("no singular point with index {j}")))?;
    let lambda_max = opts.lambda_max.unwrap_or(opts.a + 2.0);
    let q = point.model_profile();
    let spectrum = find_exponents(&q, lambda_max, &opts.model)?;
    let exponent = spectrum.first_at_least(opts.a).cloned().ok_or(Error::NoExponent { a: opts.a, lambda_max })?;
    let center = point.location;
    let profile = &exponent.profiles[0];
    let values = GridField::from_fn(grid, |z| model_value(exponent.lambda, profile, center, z));
    let reach = 2.0 * correction.unwrap_or(opts.epsilon);
    let defect = GridField::new(
        grid.clone(),
        (0..grid.len())
            .map(|k| {
                let z = grid.nodes[k];
                if (z - center).norm() > reach {
                    return C64::new(0.0, 0.0);
                }
                let v = values.values()[k];
                b_over_l.values()[k] * v.conj() - model_dbar(&q, center, z, v)
            })
            .collect(),
    )?;
    let mut out = LocalSolution { point: j, center, exponent, model_profile: q, values, defect, corrected: false };
    if let Some(eps) = correction {
        let locs = spec.locations();
        let inside = |z: C64| (z - center).norm() <= 2.0 * eps;
        let b_loc = b_over_l.map(|v, z| if inside(z) { v * crate::coefficients::eval_L(&locs, z) } else { C64::new(0.0, 0.0) });
        // G_j = O(r^{λ+τ-1}): G_j / L^m stays integrable and the correction
        // vanishes like r^{λ+τ}.
        let m_loc = (out.exponent.lambda + point.tau).ceil() as u32;
        let f = build_f(&out.defect, &locs, m_loc, &opts.solver.transform)?;
        let op = TOperator::new(grid, &locs, m_loc, &b_loc, &opts.solver.transform)?;
        let (w, _) = solve_P(&f, &op, &locs, spec.p, &opts.solver)?;
        out.values = out.values.add(&w)?;
        out.defect = GridField::zeros(grid);
        out.corrected = true;
    }
    Ok(out)
}

fn disc_nodes(grid: &Grid, center: C64, radius: f64) -> Vec<usize> {
    (0..grid.len()).filter(|&k| (grid.nodes[k] - center).norm() <= radius).collect()
}

/// `F = Σ_j [φ_j · defect_j - v_j ∂z̄φ_j]`.
pub fn glue_source(grid: &Arc<Grid>, locals: &[LocalSolution], cutoffs: &[Cutoff]) -> Result<GridField> {
    if locals.len() != cutoffs.len() {
        return Err(Error::Invalid("one cutoff per local solution required".into()));
    }
    let values = (0..grid.len())
        .map(|k| {
            let z = grid.nodes[k];
            locals
                .iter()
                .zip(cutoffs)
                .map(|(loc, cut)| {
                    let phi = cut.value(z);
                    let dphi = cut.dbar(z);
                    let mut s = C64::new(0.0, 0.0);
                    if phi != 0.0 {
                        s += phi * loc.defect.values()[k];
                    }
                    if dphi != C64::new(0.0, 0.0) {
                        s -= loc.values.values()[k] * dphi;
                    }
                    s
                })
                .sum()
        })
        .collect();
    GridField::new(grid.clone(), values)
}

/// Slope of `log |u|` against `log r` over nodes with `r_min ≤ r ≤ r_max`,
/// with one intercept per angular sector so that the angular profile does
/// not bias the fit. Nodes are weighted by `1/r²`, giving every
/// logarithmic shell equal weight.
pub fn vanishing_order(u: &GridField, center: C64, r_min: f64, r_max: f64, sectors: usize) -> Option<f64> {
    if !(r_min > 0.0 && r_max > r_min) || sectors == 0 {
        return None;
    }
    // (Σw, Σw x, Σw y, Σw x², Σw x y) per sector.
    let mut acc = vec![[0.0f64; 5]; sectors];
    let mut count = 0usize;
    for (z, v) in u.grid().nodes.iter().zip(u.values()) {
        let d = z - center;
        let r = d.norm();
        if r < r_min || r > r_max || v.norm() == 0.0 {
            continue;
        }
        let sector = ((angle_of(d) / (2.0 * std::f64::consts::PI)) * sectors as f64).floor().min(sectors as f64 - 1.0) as usize;
        let (x, y, w) = (r.ln(), v.norm().ln(), 1.0 / (r * r));
        let a = &mut acc[sector];
        a[0] += w;
        a[1] += w * x;
        a[2] += w * y;
        a[3] += w * x * x;
        a[4] += w * x * y;
        count += 1;
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for a in acc.iter().filter(|a| a[0] > 0.0) {
        sxx += a[3] - a[1] * a[1] / a[0];
        sxy += a[4] - a[1] * a[2] / a[0];
    }
    (count >= 3 * sectors.min(8) && sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, Serialize)]
pub struct PointSummary {
    pub location: [f64; 2],
    pub lambda: f64,
    pub vanishing_order: Option<f64>,
    pub glue_inside: f64,
    pub corrected: bool,
}

pub struct HomogeneousResult {
    pub u: GridField,
    pub w: GridField,
    pub locals: Vec<LocalSolution>,
    pub glue: GridField,
    pub epsilon: f64,
    pub m: u32,
    pub retries: usize,
    pub pde_residual_sup: f64,
    pub pde_residual_weighted: f64,
    /// `max |u|` over the annuli `ε ≤ |z - z_j| ≤ 2ε`.
    pub nontriviality: f64,
    /// [`Self::nontriviality`] divided by `max_j max |v_j|` on the annuli.
    pub nontriviality_relative: f64,
    pub points: Vec<PointSummary>,
    /// `max |F|` outside every `D(z_j, 2ε)`.
    pub glue_outside: f64,
    pub solve: SolveReport,
    pub degenerate: bool,
}

/// Builds `u = w + Σ φ_j v_j`. When `A ≠ 0` the construction runs on the
/// reduced equation and the result is multiplied by `e^w`.
pub fn build_homogeneous(spec: &ProblemSpec, grid: &Arc<Grid>, opts: &HomogeneousOptions) -> Result<HomogeneousResult> {
    opts.validate()?;
    let original = sample_coefficients(spec, grid)?;
    let (work, reduction) = if spec.a.is_zero() {
        (spec.clone(), None)
    } else {
        for p in &spec.points {
            if p.gamma_eff.im.abs() > 1e-12 * (1.0 + p.gamma_eff.norm()) {
                return Err(Error::Invalid(format!("complex exponent γ_eff = {} at {}: no angular limit of the reduced B", p.gamma_eff, p.location)));
            }
        }
        let (reduced, res) = reduce(spec, grid, &opts.solver.transform)?;
        (reduced.spec, Some(res))
    };
    let b_over_l = sample_coefficients(&work, grid)?.b_over_l;
    let m = opts.weight_exponent();
    let locs = work.locations();
    let mut eps = opts.epsilon;
    let mut retries = 0;
    loop {
        let cuts = checked_cutoffs(&work.domain, &locs, &vec![eps; locs.len()])?;
        let locals = (0..locs.len())
            .map(|j| {
                let plain = local_solution(&work, grid, &b_over_l, j, opts, None)?;
                let needed = match opts.correction {
                    Correction::Always => true,
                    Correction::Never => false,
                    Correction::Auto => {
                        plain.defect.max_abs() > DEFECT_TOLERANCE * plain.values.max_abs_on(&disc_nodes(grid, plain.center, 2.0 * eps)).max(1.0)
                    }
                };
                if needed {
                    local_solution(&work, grid, &b_over_l, j, opts, Some(eps))
                } else {
                    Ok(plain)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let glue = glue_source(grid, &locals, &cuts)?;
        let wspec = ProblemSpec {
            domain: work.domain.clone(),
            points: work.points.clone(),
            a: CoefficientField::zero(),
            b: work.b.clone(),
            f: CoefficientField::Samples(glue.clone()),
            m,
            p: work.p,
            condition_constant: work.condition_constant,
        };
        let sol = solve_CR(&wspec, grid, &opts.solver)?;
        let mut v = sol.u.clone();
        for (loc, cut) in locals.iter().zip(&cuts) {
            v = v.zip_with(&loc.values, |a, b, z| a + cut.value(z) * b)?;
        }
        let u = match &reduction {
            Some(r) => unreduce(&v, r)?,
            None => v,
        };
        let zero = GridField::zeros(grid);
        let (sup, weighted) = pde_residual(&u, &original.a_over_l, &original.b_over_l, &zero, grid.default_exclusion())?;

        let mut nontriv = 0.0f64;
        let mut vmax = 0.0f64;
        let mut glue_outside = 0.0f64;
        let mut inside = vec![0.0f64; locs.len()];
        for k in 0..grid.len() {
            let z = grid.nodes[k];
            let mut far = true;
            for (j, &c) in locs.iter().enumerate() {
                let r = (z - c).norm();
                if r < 2.0 * eps {
                    far = false;
                }
                if r < eps {
                    inside[j] = inside[j].max(glue.values()[k].norm());
                }
                if (eps..=2.0 * eps).contains(&r) {
                    nontriv = nontriv.max(u.values()[k].norm());
                    vmax = vmax.max(locals[j].values.values()[k].norm());
                }
            }
            if far {
                glue_outside = glue_outside.max(glue.values()[k].norm());
            }
        }
        let relative = if vmax > 0.0 { nontriv / vmax } else { 0.0 };
        let degenerate = !(relative >= 1e-6) || !(nontriv >= 1e-8);
        if degenerate && retries < opts.max_retries {
            retries += 1;
            eps *= 0.5;
            continue;
        }
        let points = locals
            .iter()
            .zip(&inside)
            .map(|(loc, &g)| PointSummary {
                location: [loc.center.re, loc.center.im],
                lambda: loc.exponent.lambda,
                vanishing_order: vanishing_order(&u, loc.center, 2.0 * grid.h(), eps, ORDER_SECTORS),
                glue_inside: g,
                corrected: loc.corrected,
            })
            .collect();
        return Ok(HomogeneousResult {
            u,
            w: sol.u,
            locals,
            glue,
            epsilon: eps,
            m,
            retries,
            pde_residual_sup: sup,
            pde_residual_weighted: weighted,
            nontriviality: nontriv,
            nontriviality_relative: relative,
            points,
            glue_outside,
            solve: sol.report,
            degenerate,
        });
    }
}
