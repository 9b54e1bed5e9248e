use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A register larger than the supported qubit cap was requested.
    #[error("capacity exceeded: {requested} {unit} (maximum {max})")]
    Capacity {
        requested: usize,
        max: usize,
        unit: &'static str,
    },

    /// A parameter is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Operands have incompatible shapes or refer to missing indices.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A formula was evaluated outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed serialized input.
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
