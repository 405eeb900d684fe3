//! Separated solutions `v = r^λ f(θ)` of the model equation `v_z̄ = q(θ) v̄ / r`.
//!
//! Substituting the ansatz gives the real-linear periodic system
//! `f' = iλ f - 2i e^{-iθ} q(θ) f̄`; `λ` is an exponent exactly when the
//! monodromy matrix of that system has eigenvalue 1.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::grid::Grid;
use crate::profile::{angle_of, PeriodicProfile};

#[derive(Clone, Debug, Serialize)]
pub struct ModelOptions {
    pub steps: usize,
    pub scan_step: f64,
    pub scan_start: f64,
    /// Width to which sign-change roots are bisected.
    pub root_tolerance: f64,
    /// `|det(M - I)|` below which a local minimum counts as a root.
    pub tangency_tolerance: f64,
    pub profile_samples: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { steps: 2048, scan_step: 0.01, scan_start: 1e-6, root_tolerance: 1e-13, tangency_tolerance: 1e-10, profile_samples: 256 }
    }
}

/// Coefficient `a(θ) = -2i e^{-iθ} q(θ)` tabulated at RK4 half steps.
struct ModelSystem {
    steps: usize,
    h: f64,
    a: Vec<C64>,
}

impl ModelSystem {
    fn new(q: &PeriodicProfile, steps: usize) -> Self {
        let h = 2.0 * PI / steps as f64;
        let a = (0..=2 * steps)
            .map(|k| {
                let t = 0.5 * h * k as f64;
                C64::new(0.0, -2.0) * C64::from_polar(1.0, -t) * q.eval(t)
            })
            .collect();
        ModelSystem { steps, h, a }
    }

    fn rhs(&self, lambda: f64, half: usize, f: C64) -> C64 {
        C64::new(0.0, lambda) * f + self.a[half] * f.conj()
    }

    /// Integrates from `f(0) = f0`, calling `visit(step, f)` at every step.
    fn integrate(&self, lambda: f64, f0: C64, mut visit: impl FnMut(usize, C64)) -> C64 {
        let h = self.h;
        let mut f = f0;
        visit(0, f);
        for k in 0..self.steps {
            let k1 = self.rhs(lambda, 2 * k, f);
            let k2 = self.rhs(lambda, 2 * k + 1, f + k1 * (0.5 * h));
            let k3 = self.rhs(lambda, 2 * k + 1, f + k2 * (0.5 * h));
            let k4 = self.rhs(lambda, 2 * k + 2, f + k3 * h);
            f += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
            visit(k + 1, f);
        }
        f
    }

    fn monodromy(&self, lambda: f64) -> [[f64; 2]; 2] {
        let e1 = self.integrate(lambda, C64::new(1.0, 0.0), |_, _| {});
        let e2 = self.integrate(lambda, C64::new(0.0, 1.0), |_, _| {});
        [[e1.re, e2.re], [e1.im, e2.im]]
    }
}

/// Real 2×2 monodromy of the angular system over `[0, 2π]`, acting on
/// `(Re f(0), Im f(0))`.
pub fn monodromy(lambda: f64, q: &PeriodicProfile, steps: usize) -> [[f64; 2]; 2] {
    ModelSystem::new(q, steps).monodromy(lambda)
}

fn det_minus_identity(m: &[[f64; 2]; 2]) -> f64 {
    (m[0][0] - 1.0) * (m[1][1] - 1.0) - m[0][1] * m[1][0]
}

/// Singular values of `M - I`, largest first.
fn singular_values_minus_identity(m: &[[f64; 2]; 2]) -> (f64, f64) {
    let a = m[0][0] - 1.0;
    let b = m[0][1];
    let c = m[1][0];
    let d = m[1][1] - 1.0;
    let fro2 = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let smax = (0.5 * (fro2 + disc)).sqrt();
    let smin = if smax > 0.0 { det / smax } else { 0.0 };
    (smax, smin)
}

#[derive(Clone, Debug)]
pub struct ModelExponent {
    pub lambda: f64,
    /// Real dimension of the space of periodic solutions at this exponent.
    pub multiplicity: usize,
    pub profiles: Vec<PeriodicProfile>,
    /// `|det(M(λ) - I)|`.
    pub residual: f64,
    /// `min_θ |f(θ)|` over the integration nodes, per profile.
    pub min_abs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ModelSpectrum {
    pub q_profile: PeriodicProfile,
    pub entries: Vec<ModelExponent>,
    pub warnings: Vec<String>,
}

impl ModelSpectrum {
    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    /// Smallest exponent `≥ a`.
    pub fn first_at_least(&self, a: f64) -> Option<&ModelExponent> {
        self.entries.iter().find(|e| e.lambda >= a)
    }
}

fn golden_min(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

fn bisect(mut lo: f64, mut hi: f64, tol: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exponents in `(0, lambda_max]` with their periodic profiles.
pub fn find_exponents(q: &PeriodicProfile, lambda_max: f64, opts: &ModelOptions) -> Result<ModelSpectrum> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::Invalid(format!("lambda_max must be positive, got {lambda_max}")));
    }
    if opts.steps < 16 || !(opts.scan_step > 0.0) {
        return Err(Error::Invalid("model integration needs at least 16 steps and a positive scan step".into()));
    }
    let sys = ModelSystem::new(q, opts.steps);
    let g = |l: f64| det_minus_identity(&sys.monodromy(l));
    let smin = |l: f64| singular_values_minus_identity(&sys.monodromy(l)).1;

    let count = ((lambda_max - opts.scan_start) / opts.scan_step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..=count).map(|k| opts.scan_start + k as f64 * opts.scan_step).collect();
    let values: Vec<f64> = grid.par_iter().map(|&l| g(l)).collect();

    let mut roots = Vec::new();
    for k in 0..grid.len() - 1 {
        if values[k] == 0.0 {
            roots.push(grid[k]);
        } else if values[k] * values[k + 1] < 0.0 {
            roots.push(bisect(grid[k], grid[k + 1], opts.root_tolerance, g));
        }
    }
    for k in 1..grid.len() - 1 {
        let (a, b, c) = (values[k - 1].abs(), values[k].abs(), values[k + 1].abs());
        let s = values[k].signum();
        let same_sign = values[k - 1] * s > 0.0 && values[k + 1] * s > 0.0;
        if same_sign && b <= a && b <= c {
            let (lo, hi) = (grid[k - 1], grid[k + 1]);
            let ext = golden_min(lo, hi, 1e-12, |l| s * g(l));
            if g(ext) * s < 0.0 {
                // Two roots closer than the scan step.
                roots.push(bisect(lo, ext, opts.root_tolerance, g));
                roots.push(bisect(ext, hi, opts.root_tolerance, g));
                continue;
            }
            let l = golden_min(lo, hi, opts.root_tolerance, smin);
            if g(l).abs() <= opts.tangency_tolerance {
                roots.push(l);
            }
        }
    }
    roots.retain(|&l| l > 0.0 && l <= lambda_max);
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-8);

    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for l in roots {
        let m = sys.monodromy(l);
        let (smax, _) = singular_values_minus_identity(&m);
        let starts: Vec<C64> = if smax < 1e-6 {
            vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]
        } else {
            let r0 = [m[0][0] - 1.0, m[0][1]];
            let r1 = [m[1][0], m[1][1] - 1.0];
            let r = if r0[0].hypot(r0[1]) >= r1[0].hypot(r1[1]) { r0 } else { r1 };
            let n = r[0].hypot(r[1]);
            let v = C64::new(-r[1] / n, r[0] / n);
            // Normalize the sign so that profiles are reproducible.
            vec![if v.re < 0.0 || (v.re == 0.0 && v.im < 0.0) { -v } else { v }]
        };
        let mut profiles = Vec::new();
        let mut mins = Vec::new();
        let mut ok = true;
        for f0 in &starts {
            let (profile, min_abs) = integrate_profile(&sys, l, *f0, opts.profile_samples)?;
            if min_abs <= 1e-12 {
                ok = false;
                warnings.push(format!("rejected λ = {l}: profile vanishes (min |f| = {min_abs:e})"));
                break;
            }
            profiles.push(profile);
            mins.push(min_abs);
        }
        if ok {
            entries.push(ModelExponent { lambda: l, multiplicity: starts.len(), profiles, residual: det_minus_identity(&m).abs(), min_abs: mins });
        }
    }
    if entries.is_empty() {
        warnings.push(format!("no exponent found in (0, {lambda_max}]"));
    }
    Ok(ModelSpectrum { q_profile: q.clone(), entries, warnings })
}

fn integrate_profile(sys: &ModelSystem, lambda: f64, f0: C64, samples: usize) -> Result<(PeriodicProfile, f64)> {
    if !sys.steps.is_multiple_of(samples) {
        return Err(Error::Invalid(format!("profile samples {samples} must divide the step count {}", sys.steps)));
    }
    let stride = sys.steps / samples;
    let mut out = Vec::with_capacity(samples);
    let mut min_abs = f64::INFINITY;
    sys.integrate(lambda, f0, |k, f| {
        min_abs = min_abs.min(f.norm());
        if k % stride == 0 && k < sys.steps {
            out.push(f);
        }
    });
    Ok((PeriodicProfile::from_samples(out)?, min_abs))
}

/// `v(z) = |z - center|^λ f(arg(z - center))`, zero at the center.
pub fn model_value(lambda: f64, profile: &PeriodicProfile, center: C64, z: C64) -> C64 {
    let w = z - center;
    let r = w.norm();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    profile.eval(angle_of(w)) * r.powf(lambda)
}

pub fn model_solution(entry: &ModelExponent, profile_index: usize, center: C64, grid: &Arc<Grid>) -> Result<GridField> {
    let profile =
        entry.profiles.get(profile_index).ok_or_else(|| Error::Invalid(format!("exponent {} has {} profiles", entry.lambda, entry.profiles.len())))?;
    Ok(GridField::from_fn(grid, |z| model_value(entry.lambda, profile, center, z)))
}
