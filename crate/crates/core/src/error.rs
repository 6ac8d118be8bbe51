use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user-supplied configuration (topology files, experiment configs).
    #[error("configuration error: {0}")]
    Config(String),

    /// A value handed to an operation violates its precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot parse feature expression `{expr}`: {reason}")]
    Parse { expr: String, reason: String },

    #[error("action class {0} has no samples; the target policy never produced it")]
    MissingClass(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Configuration errors and runtime errors map to different process exit codes.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. } | Error::Json(_))
    }
}
