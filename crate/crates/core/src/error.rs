use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("parameter outside model domain: {0}")]
    ParameterDomain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty direction set")]
    EmptyDirections,

    #[error("wasserstein inversion failed for direction {direction:?}: {reason}")]
    Inversion { direction: Vec<f64>, reason: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("regression error: {0}")]
    Regression(String),

    #[error("matrix not invertible (condition number {condition:e})")]
    NotInvertible { condition: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("harness: {0}")]
    Harness(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
