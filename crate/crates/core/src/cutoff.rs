//! C^∞ radial cutoffs: `β(t) = 1` for `t ≤ 1`, `0` for `t ≥ 2`.

use num_complex::Complex64 as C64;

fn psi(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

fn dpsi(s: f64) -> f64 {
    if s > 0.0 {
        psi(s) / (s * s)
    } else {
        0.0
    }
}

pub fn beta(t: f64) -> f64 {
    if t <= 1.0 {
        return 1.0;
    }
    if t >= 2.0 {
        return 0.0;
    }
    let a = psi(2.0 - t);
    let b = psi(t - 1.0);
    a / (a + b)
}

pub fn beta_prime(t: f64) -> f64 {
    if t <= 1.0 || t >= 2.0 {
        return 0.0;
    }
    let a = psi(2.0 - t);
    let b = psi(t - 1.0);
    let da = -dpsi(2.0 - t);
    let db = dpsi(t - 1.0);
    (da * b - a * db) / ((a + b) * (a + b))
}

/// `φ(z) = β(|z - center| / delta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub center: C64,
    pub delta: f64,
}

impl Cutoff {
    pub fn new(center: C64, delta: f64) -> Self {
        Cutoff { center, delta }
    }

    pub fn value(&self, z: C64) -> f64 {
        beta((z - self.center).norm() / self.delta)
    }

    /// Exact `∂φ/∂z̄ = β'(r/δ) e^{iθ} / (2δ)`.
    pub fn dbar(&self, z: C64) -> C64 {
        let w = z - self.center;
        let r = w.norm();
        let d = beta_prime(r / self.delta);
        if d == 0.0 {
            return C64::new(0.0, 0.0);
        }
        w / r * (d / (2.0 * self.delta))
    }

    pub fn support_radius(&self) -> f64 {
        2.0 * self.delta
    }
}
