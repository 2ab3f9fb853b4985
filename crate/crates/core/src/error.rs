use thiserror::Error;

/// Errors raised by the evaluation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a loss generator or moment map.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model, distribution or experiment parameters violate their constraints.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Not enough observations for the requested computation.
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// The input series carries no variation.
    #[error("degenerate series: {0}")]
    Degenerate(String),

    /// A configuration file or option is malformed.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input data; `line` is 1-based when known.
    #[error("data error at line {line}: {message}")]
    Data { line: u64, message: String },

    /// The operation is not available for this input (e.g. oracle on real data).
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        Error::Data {
            line,
            message: err.to_string(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Data {
            line: err.line() as u64,
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
