//! Numerical solver for generalized Cauchy-Riemann equations
//! `∂u/∂z̄ = (A/L) u + (B/L) ū + F` with `L(z) = ∏ (z - z_j)`, whose
//! coefficients blow up like `1/|z - z_j|` at finitely many points.
//!
//! The pipeline removes `A` by an exponential substitution, rewrites the
//! equation as a Fredholm integral equation `u - T u = f` in weighted spaces,
//! and solves it on a graded grid. A separate module computes the model
//! exponents that govern how homogeneous solutions vanish at each point, and
//! glues local model solutions into a global one.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cauchy;
pub mod coefficients;
pub mod cutoff;
pub mod error;
pub mod expr;
pub mod field;
pub mod fredholm;
pub mod geometry;
pub mod grid;
pub mod homogeneous;
pub mod model;
pub mod profile;
pub mod reduction;
pub mod report;
pub mod spec_io;
pub mod verify;

pub use num_complex::Complex64 as C64;

pub use cauchy::{apply_T, apply_T_star, build_f, pompeiu, pompeiu_at, TOperator, TransformOptions};
pub use coefficients::{compute_gamma, eval_L, eval_M, verify_condition, CoefficientField, PointInput, ProblemSpec, SingularPoint};
pub use error::{Error, Result};
pub use expr::{parse_expression, Expr};
pub use field::{holder_estimate, wirtinger_dbar, GridField};
pub use fredholm::{kernel_basis, solve_CR, solve_P, Method, SolveReport, SolverOptions};
pub use grid::{make_grid, Domain, Grid, RingSpec};
pub use homogeneous::{build_homogeneous, HomogeneousOptions, HomogeneousResult};
pub use model::{find_exponents, monodromy, ModelOptions, ModelSpectrum};
pub use profile::PeriodicProfile;
pub use reduction::{build_w, reduce, unreduce};
pub use report::Report;
pub use spec_io::SpecFile;
pub use verify::{verify_suite, Level};
