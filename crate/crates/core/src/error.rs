//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or file is invalid.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Vector or matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A NaN or infinity appeared where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Input data is malformed (CSV schema, timestamps, ranges).
    #[error("data error: {0}")]
    Data(String),

    /// The linear-program solver could not produce a certified optimum.
    #[error("lp solver: {0}")]
    Lp(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for config/data problems, 3 for
    /// numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::Data(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::DimensionMismatch(_) | Error::NonFinite(_) | Error::Lp(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
