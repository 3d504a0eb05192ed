use thiserror::Error;

/// Errors produced by graph ingestion, tree manipulation and the algorithms.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text (edge lists, tree documents).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A precondition on values or arguments was violated.
    #[error("{0}")]
    Domain(String),

    /// Internal consistency violation (cyclic topology, orphan nodes, ...).
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
