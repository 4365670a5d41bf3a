//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BmcdError {
    #[error("dimension mismatch: {expected} != {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument `{name}`: {message}")]
    InvalidArgument { name: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("alpha {alpha} outside the table grid [{min}, {max}]")]
    Extrapolation { alpha: f64, min: f64, max: f64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl BmcdError {
    pub fn invalid(name: &str, message: impl Into<String>) -> Self {
        BmcdError::InvalidArgument {
            name: name.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, BmcdError>;
