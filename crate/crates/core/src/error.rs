use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while building problems or running the solvers.
#[derive(Debug, Error)]
pub enum SspError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("inconsistent oracle: {0}")]
    InconsistentOracle(String),

    #[error("system is inconsistent: {0}")]
    Inconsistent(String),

    #[error("non-finite iterate at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SspError {
    pub fn config(msg: impl Into<String>) -> Self {
        SspError::Config(msg.into())
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        SspError::Dimension(msg.into())
    }
}

pub type Result<T, E = SspError> = std::result::Result<T, E>;
