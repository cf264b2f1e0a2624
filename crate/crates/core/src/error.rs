use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid element capacity E={0}: must be at least 1")]
    InvalidCapacity(u32),

    #[error("invalid hyperparameter `{name}` = {value}: {reason}")]
    InvalidHyperparams {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("derivative requested at boundary point (P={p}, v={v}); use a one-sided difference")]
    BoundaryDerivative { p: f64, v: f64 },

    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("nothing to render: {0}")]
    EmptyData(&'static str),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    ParseLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: invalid record: {message}")]
    InvalidRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown level label {0}")]
    UnknownLevel(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
