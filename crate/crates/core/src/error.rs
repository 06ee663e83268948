use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest row {row}: {reason}")]
    Manifest { row: usize, reason: String },
    #[error("invalid label {0:?} (expected one of Pass, L0_L1, L2, L3)")]
    InvalidLabel(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range for size {size}")]
    OutOfRange { index: usize, size: usize },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("embedding provider failed on chunk {chunk}: {reason}")]
    Provider { chunk: usize, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Regex(#[from] regex::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input or configuration rather than a
    /// failure inside the pipeline.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Manifest { .. }
                | Error::InvalidLabel(_)
                | Error::Empty(_)
                | Error::Config(_)
                | Error::UnknownKey(_)
        )
    }
}
