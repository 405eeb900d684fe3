//! JSON problem files.
//!
//! ```json
//! {
//!   "domain": { "shape": "disc", "center": [0, 0], "radius": 1 },
//!   "points": [ { "location": [0, 0], "tau": 0.5, "delta": 0.2,
//!                 "q_profile": { "fourier": [ { "k": 1, "c": [0.5, 0] } ] } } ],
//!   "A": { "kind": "expression", "expr": "0" },
//!   "B": { "kind": "expression", "expr": "0.5*exp(i*theta_1)" },
//!   "F": { "kind": "samples", "file": "f.csv" },
//!   "m": 1, "p": 4,
//!   "grid": { "n": 64 },
//!   "exponents": { "q_profile": { "samples": [[0.5, 0], ...] }, "lambda_max": 2 },
//!   "homogeneous": { "a": 0.5, "epsilon": 0.15 }
//! }
//! ```
//!
//! Coefficient blocks have `kind` `expression`, `profile+remainder` or
//! `samples` (a CSV file `x,y,re,im` or inline `[x, y, re, im]` rows).
//! Every block except `domain` is optional; missing coefficients are zero.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::coefficients::{CoefficientField, PointInput, ProblemSpec};
use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::expr::parse_expression;
use crate::field::{read_field_csv, GridField};
use crate::fredholm::Method;
use crate::grid::{Domain, Grid, RingSpec};
use crate::homogeneous::Correction;
use crate::profile::{PeriodicProfile, ProfileSpec};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub domain: Option<Domain>,
    #[serde(default)]
    pub points: Vec<PointFile>,
    #[serde(rename = "A")]
    pub a: Option<CoefficientFile>,
    #[serde(rename = "B")]
    pub b: Option<CoefficientFile>,
    #[serde(rename = "F")]
    pub f: Option<CoefficientFile>,
    #[serde(default)]
    pub m: u32,
    pub p: Option<f64>,
    pub condition_constant: Option<f64>,
    #[serde(default)]
    pub grid: GridFile,
    #[serde(default)]
    pub solver: SolverFile,
    pub exponents: Option<ExponentsFile>,
    pub homogeneous: Option<HomogeneousFile>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointFile {
    pub location: [f64; 2],
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub p_profile: Option<ProfileSpec>,
    pub q_profile: Option<ProfileSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum CoefficientFile {
    #[serde(rename = "expression")]
    Expression { expr: String },
    #[serde(rename = "profile+remainder")]
    ProfileRemainder {
        profiles: Vec<PointProfileFile>,
        #[serde(default = "zero_expr")]
        remainder: String,
    },
    #[serde(rename = "samples")]
    Samples { file: Option<String>, values: Option<Vec<[f64; 4]>> },
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointProfileFile {
    /// Zero-based index into `points`.
    pub point: usize,
    pub profile: ProfileSpec,
    /// Radius of the disc where the profile is used unmodified; defaults to the point's `delta`.
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub n: Option<usize>,
    pub rings: Option<RingSpec>,
    /// Set to `false` to use the plain lattice near singular points.
    pub ring_patches: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverFile {
    pub method: Option<Method>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub sv_cutoff: Option<f64>,
    pub n_h: Option<usize>,
    pub excision_factor: Option<f64>,
    /// Acceptance bound for the weighted PDE residual; defaults to the grid spacing.
    pub residual_tolerance: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsFile {
    pub q_profile: ProfileSpec,
    pub lambda_max: f64,
    pub steps: Option<usize>,
    pub scan_step: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogeneousFile {
    pub a: f64,
    #[serde(default)]
    pub k: u32,
    pub epsilon: f64,
    pub lambda_max: Option<f64>,
    pub m: Option<u32>,
    #[serde(default)]
    pub correction: Correction,
}

impl SpecFile {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut s: SpecFile = serde_json::from_str(text)?;
        s.base_dir = base_dir.to_path_buf();
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn domain(&self) -> Result<Domain> {
        let d = self.domain.clone().ok_or_else(|| Error::Invalid("the spec has no 'domain' block".into()))?;
        d.validate()?;
        Ok(d)
    }

    pub fn locations(&self) -> Vec<C64> {
        self.points.iter().map(|p| C64::new(p.location[0], p.location[1])).collect()
    }

    pub fn ring_spec(&self) -> Option<RingSpec> {
        match self.grid.ring_patches {
            Some(false) => None,
            _ => Some(self.grid.rings.unwrap_or_default()),
        }
    }

    fn coefficient(&self, block: &Option<CoefficientFile>, name: &str, domain: &Domain) -> Result<CoefficientField> {
        let Some(block) = block else {
            return Ok(CoefficientField::zero());
        };
        match block {
            CoefficientFile::Expression { expr } => Ok(CoefficientField::Expression(parse_expression(expr)?)),
            CoefficientFile::ProfileRemainder { profiles, remainder } => {
                let mut terms = Vec::with_capacity(profiles.len());
                for pp in profiles {
                    let point = self
                        .points
                        .get(pp.point)
                        .ok_or_else(|| Error::Invalid(format!("{name}: profile refers to point {} but only {} points exist", pp.point, self.points.len())))?;
                    let radius = pp
                        .radius
                        .or(point.delta)
                        .ok_or_else(|| Error::Invalid(format!("{name}: profile for point {} needs 'radius' or the point's 'delta'", pp.point)))?;
                    terms.push((Cutoff::new(C64::new(point.location[0], point.location[1]), radius), pp.profile.build()?));
                }
                Ok(CoefficientField::ProfileRemainder { terms, remainder: parse_expression(remainder)? })
            }
            CoefficientFile::Samples { file, values } => {
                let rows: Vec<(C64, C64)> = match (file, values) {
                    (Some(f), None) => read_field_csv(std::fs::File::open(self.base_dir.join(f))?)?,
                    (None, Some(v)) => v.iter().map(|r| (C64::new(r[0], r[1]), C64::new(r[2], r[3]))).collect(),
                    _ => return Err(Error::Invalid(format!("{name}: samples need exactly one of 'file' or 'values'"))),
                };
                let (nodes, vals): (Vec<C64>, Vec<C64>) = rows.into_iter().unzip();
                let grid = Arc::new(Grid::scattered(domain.clone(), nodes)?);
                Ok(CoefficientField::Samples(GridField::new(grid, vals)?))
            }
        }
    }

    /// Builds the validated problem; point profiles not given are extracted from `A` and `B`.
    pub fn problem(&self) -> Result<ProblemSpec> {
        let domain = self.domain()?;
        let a = self.coefficient(&self.a, "A", &domain)?;
        let b = self.coefficient(&self.b, "B", &domain)?;
        let f = self.coefficient(&self.f, "F", &domain)?;
        let inputs = self
            .points
            .iter()
            .map(|p| {
                let mut inp = PointInput::at(C64::new(p.location[0], p.location[1]));
                if let Some(t) = p.tau {
                    inp = inp.tau(t);
                }
                if let Some(d) = p.delta {
                    inp = inp.delta(d);
                }
                if let Some(pp) = &p.p_profile {
                    inp = inp.p_profile(pp.build()?);
                }
                if let Some(q) = &p.q_profile {
                    inp = inp.q_profile(q.build()?);
                }
                Ok(inp)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut spec = ProblemSpec::new(domain, inputs, a, b, f, self.m)?;
        if let Some(p) = self.p {
            spec = spec.with_p(p)?;
        }
        if let Some(c) = self.condition_constant {
            if !(c > 0.0) {
                return Err(Error::Invalid(format!("condition_constant must be positive, got {c}")));
            }
            spec.condition_constant = c;
        }
        Ok(spec)
    }

    pub fn exponents_profile(&self) -> Result<(PeriodicProfile, f64)> {
        let e = self.exponents.as_ref().ok_or_else(|| Error::Invalid("the spec has no 'exponents' block".into()))?;
        Ok((e.q_profile.build()?, e.lambda_max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISC: &str = r#"{
        "domain": { "shape": "disc", "center": [0, 0], "radius": 1 },
        "points": [ { "location": [0, 0], "delta": 0.2 } ],
        "B": { "kind": "expression", "expr": "0" },
        "F": { "kind": "expression", "expr": "1" },
        "m": 0
    }"#;

    #[test]
    fn parses_expression_spec() {
        let s = SpecFile::parse(DISC, Path::new(".")).unwrap();
        let p = s.problem().unwrap();
        assert_eq!(p.points.len(), 1);
        assert!(p.a.is_zero());
        assert_eq!(p.f.eval(C64::new(0.3, 0.1), &p.locations()).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn parses_profile_and_samples() {
        let text = r#"{
            "domain": { "shape": "rectangle", "min": [-1, -1], "max": [1, 1] },
            "points": [ { "location": [0, 0], "delta": 0.2,
                          "q_profile": { "fourier": [ { "k": 1, "c": [0.5, 0] } ] } } ],
            "B": { "kind": "profile+remainder",
                   "profiles": [ { "point": 0, "profile": { "fourier": [ { "k": 1, "c": [0.5, 0] } ] } } ],
                   "remainder": "0" },
            "F": { "kind": "samples", "values": [[0, 0.5, 2, 0], [0.5, 0, 3, 1]] },
            "exponents": { "q_profile": { "samples": [[0.5, 0], [0.5, 0], [0.5, 0], [0.5, 0]] }, "lambda_max": 2 }
        }"#;
        let s = SpecFile::parse(text, Path::new(".")).unwrap();
        let p = s.problem().unwrap();
        let z = C64::from_polar(0.1, 0.7);
        let b = p.b.eval(z, &p.locations()).unwrap();
        assert!((b - C64::from_polar(0.5, 0.7)).norm() < 1e-12);
        assert_eq!(p.f.eval(C64::new(0.4, 0.1), &p.locations()).unwrap(), C64::new(3.0, 1.0));
        assert!(s.exponents_profile().is_err(), "four samples are below the profile minimum");
    }

    #[test]
    fn rejects_malformed_and_unknown() {
        assert!(SpecFile::parse("{ \"domain\": ", Path::new(".")).is_err());
        assert!(SpecFile::parse(r#"{ "domain": { "shape": "disc", "center": [0,0], "radius": 1 }, "bogus": 1 }"#, Path::new(".")).is_err());
        let s = SpecFile::parse(r#"{ "points": [] }"#, Path::new(".")).unwrap();
        assert!(s.problem().is_err());
    }
}
