use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by environment construction, agents and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its documented range.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// An object could not be built so that its invariants hold.
    #[error("construction failed: {0}")]
    Construction(String),

    /// Shapes of two objects that must agree do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A run configuration failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical routine failed where the math says it cannot.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration problems exit with code 1, everything else with 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Param(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
