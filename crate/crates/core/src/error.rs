use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FicoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FicoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("nondeterministic search: result digests differ across repeats")]
    DigestMismatch,
}

impl FicoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FicoError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        FicoError::Format(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        FicoError::InvalidArgument(msg.into())
    }

    pub fn is_io(&self) -> bool {
        matches!(self, FicoError::Io { .. })
    }
}
