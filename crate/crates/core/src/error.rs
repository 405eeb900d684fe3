use num_complex::Complex64;
use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite value at node {node} (z = {z})")]
    NonFinite { node: usize, z: Complex64 },

    #[error("pole: {0}")]
    Pole(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("solver did not reach tolerance (best residual {residual:.3e})")]
    NotConverged { residual: f64 },

    #[error("dense system of size {size} exceeds cap {cap}; use a smaller grid")]
    TooLarge { size: usize, cap: usize },

    #[error("no model exponent >= {a} found below lambda_max = {lambda_max}; raise lambda_max")]
    NoExponent { a: f64, lambda_max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
