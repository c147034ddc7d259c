use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid optimizer state: {0}")]
    InvalidState(String),

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error("calibration failed: target epsilon {target} is not attainable for sigma in [{lo}, {hi}]")]
    CalibrationFailure { target: f64, lo: f64, hi: f64 },

    #[error("argument {value} is outside the domain; supremum is {supremum}")]
    Domain { value: f64, supremum: f64 },

    #[error("equivalence check failed for {kind}: worst trial {worst}")]
    EquivalenceFailure { kind: String, worst: String },

    #[error("lemma audit found {} violation(s); first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    AuditFailure(Vec<String>),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("numeric abort at step {step}: {message}")]
    NumericAbort { step: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
