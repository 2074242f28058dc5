use thiserror::Error;

use crate::poly::Polynomial;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative order {order} exceeds supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("Remez exchange did not converge after {iterations} iterations (relative gap {gap:.3e})")]
    Convergence {
        iterations: usize,
        gap: f64,
        best: Box<Polynomial>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown distribution preset `{0}`")]
    UnknownPreset(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-finite estimator value at count {at}")]
    Overflow { at: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
