//! 2π-periodic complex functions stored as uniform samples, with the
//! trigonometric interpolant used for evaluation between samples.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 64;
pub const DEFAULT_SAMPLES: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicProfile {
    samples: Vec<C64>,
    /// Fourier coefficients for modes `-(n/2)..=n/2-1`, index `k + n/2`.
    coeffs: Vec<C64>,
    /// Modes used by the interpolant, negligible ones dropped.
    active: Vec<(i64, C64)>,
}

impl PeriodicProfile {
    pub fn from_samples(samples: Vec<C64>) -> Result<Self> {
        let n = samples.len();
        if n < MIN_SAMPLES || !n.is_multiple_of(2) {
            return Err(Error::Invalid(format!("periodic profile needs an even number >= {MIN_SAMPLES} of samples, got {n}")));
        }
        if samples.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Invalid("periodic profile has non-finite samples".into()));
        }
        let half = (n / 2) as i64;
        let coeffs = (-half..half)
            .map(|k| {
                let s: C64 = samples.iter().enumerate().map(|(j, &v)| v * C64::from_polar(1.0, -(k as f64) * TAU * j as f64 / n as f64)).sum();
                s / n as f64
            })
            .collect::<Vec<C64>>();
        // The Nyquist mode is split evenly between ±n/2 so that the
        // interpolant of real samples stays real.
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut active = Vec::new();
        for (idx, &c) in coeffs.iter().enumerate() {
            if c.norm() <= 1e-15 * scale {
                continue;
            }
            let k = idx as i64 - half;
            if k == -half {
                active.push((k, 0.5 * c));
                active.push((half, 0.5 * c));
            } else {
                active.push((k, c));
            }
        }
        Ok(PeriodicProfile { samples, coeffs, active })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> C64) -> Result<Self> {
        Self::from_samples((0..n).map(|j| f(TAU * j as f64 / n as f64)).collect())
    }

    pub fn constant(c: C64) -> Self {
        Self::from_samples(vec![c; DEFAULT_SAMPLES]).expect("valid sample count")
    }

    /// Builds `Σ c_k e^{ikθ}` sampled at `n` points.
    pub fn from_fourier(terms: &[(i64, C64)], n: usize) -> Result<Self> {
        if let Some((k, _)) = terms.iter().find(|(k, _)| k.unsigned_abs() as usize >= n / 2) {
            return Err(Error::Invalid(format!("Fourier mode {k} not resolved by {n} samples")));
        }
        Self::from_fn(n, |t| terms.iter().map(|&(k, c)| c * C64::from_polar(1.0, k as f64 * t)).sum())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn theta(&self, j: usize) -> f64 {
        TAU * j as f64 / self.samples.len() as f64
    }

    /// Fourier coefficient of `e^{ikθ}` (zero outside the resolved band).
    pub fn coefficient(&self, k: i64) -> C64 {
        let half = (self.samples.len() / 2) as i64;
        if k < -half || k >= half {
            return C64::new(0.0, 0.0);
        }
        self.coeffs[(k + half) as usize]
    }

    /// Trapezoid mean `(1/2π)∫ f dθ`.
    pub fn mean(&self) -> C64 {
        self.samples.iter().sum::<C64>() / self.samples.len() as f64
    }

    /// Trigonometric interpolant at any angle.
    pub fn eval(&self, theta: f64) -> C64 {
        self.active.iter().map(|&(k, c)| c * C64::from_polar(1.0, k as f64 * theta)).sum()
    }

    pub fn derivative(&self, theta: f64) -> C64 {
        self.active.iter().map(|&(k, c)| c * C64::new(0.0, k as f64) * C64::from_polar(1.0, k as f64 * theta)).sum()
    }

    /// `∫₀^θ (f - mean) ds`, periodic.
    pub fn primitive(&self, theta: f64) -> C64 {
        self.active.iter().filter(|&&(k, _)| k != 0).map(|&(k, c)| c * (C64::from_polar(1.0, k as f64 * theta) - 1.0) / C64::new(0.0, k as f64)).sum()
    }

    pub fn map(&self, f: impl Fn(f64, C64) -> C64) -> Self {
        let n = self.samples.len();
        Self::from_samples((0..n).map(|j| f(TAU * j as f64 / n as f64, self.samples[j])).collect()).expect("same sample count")
    }

    pub fn min_abs(&self) -> f64 {
        self.samples.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Principal angle mapped to `[0, 2π)`.
pub fn angle_of(w: C64) -> f64 {
    let a = w.im.atan2(w.re);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// JSON form of a profile.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSpec {
    Fourier(Vec<FourierTerm>),
    Samples(Vec<C64>),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FourierTerm {
    pub k: i64,
    pub c: C64,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<PeriodicProfile> {
        match self {
            ProfileSpec::Fourier(terms) => {
                let kmax = terms.iter().map(|t| t.k.unsigned_abs() as usize).max().unwrap_or(0);
                let mut n = DEFAULT_SAMPLES;
                while n / 2 <= kmax {
                    n *= 2;
                }
                let pairs: Vec<(i64, C64)> = terms.iter().map(|t| (t.k, t.c)).collect();
                PeriodicProfile::from_fourier(&pairs, n)
            }
            ProfileSpec::Samples(s) => PeriodicProfile::from_samples(s.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_modes_recovered() {
        let p = PeriodicProfile::from_fourier(&[(2, C64::new(1.0, 0.5)), (-3, C64::new(0.0, 2.0))], 64).unwrap();
        assert!((p.coefficient(2) - C64::new(1.0, 0.5)).norm() < 1e-13);
        assert!((p.coefficient(-3) - C64::new(0.0, 2.0)).norm() < 1e-13);
        assert!(p.coefficient(0).norm() < 1e-13);
        let t = 0.731;
        let exact = C64::new(1.0, 0.5) * C64::from_polar(1.0, 2.0 * t) + C64::new(0.0, 2.0) * C64::from_polar(1.0, -3.0 * t);
        assert!((p.eval(t) - exact).norm() < 1e-12);
    }

    #[test]
    fn primitive_and_derivative() {
        let p = PeriodicProfile::from_fn(128, |t| C64::new(1.0 + (3.0 * t).cos(), t.sin())).unwrap();
        let t: f64 = 1.3;
        let exact = C64::new((3.0f64 * t).sin() / 3.0, 1.0 - f64::cos(t));
        assert!((p.primitive(t) - exact).norm() < 1e-12);
        assert!(p.primitive(TAU).norm() < 1e-12);
        let d = C64::new(-3.0 * (3.0 * t).sin(), t.cos());
        assert!((p.derivative(t) - d).norm() < 1e-11);
    }

    #[test]
    fn rejects_short_or_odd() {
        assert!(PeriodicProfile::from_samples(vec![C64::new(0.0, 0.0); 32]).is_err());
        assert!(PeriodicProfile::from_samples(vec![C64::new(0.0, 0.0); 65]).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let s: ProfileSpec = serde_json::from_str(r#"{"fourier":[{"k":2,"c":[0.5,0.0]}]}"#).unwrap();
        let p = s.build().unwrap();
        assert!((p.eval(0.0) - 0.5).norm() < 1e-14);
    }
}
