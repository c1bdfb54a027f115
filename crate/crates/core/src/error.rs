use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the conformalized link prediction library.
#[derive(Debug, Error)]
pub enum ClpError {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("requested {requested} non-edges but only {available} exist")]
    Capacity { requested: usize, available: usize },

    #[error("hurwitz zeta diverges for exponent {0} (must be > 1)")]
    Divergence(f64),

    #[error("degree {degree} lies below d_min = {d_min}")]
    Domain { degree: usize, d_min: usize },

    #[error("calibration set is empty after sampling")]
    DegenerateCalibration,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ClpError>;

pub(crate) fn invalid(msg: impl Into<String>) -> ClpError {
    ClpError::Validation(msg.into())
}
