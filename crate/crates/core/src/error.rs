//! Error types shared across the library.

use thiserror::Error;

/// Top-level error for library operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or file.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or missing input data (CSV streams, model files).
    #[error("input error: {0}")]
    Input(String),

    /// Numerical failure (factorization breakdown, singular system, non-finite value).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// I/O failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code associated with this error class.
    ///
    /// 2 = config, 3 = input/IO, 4 = numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Input(_) | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
