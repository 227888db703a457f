use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the matching pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed a value that violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Malformed on-disk input (dataset files, pair lists, checkpoints).
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    /// A numeric operation left its domain (e.g. division by ~0).
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// Training could not proceed (sampler starvation, empty validation set, ...).
    #[error("training aborted: {0}")]
    Training(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
