use std::path::PathBuf;

/// Errors produced by the simulator, the networks and the trainer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// A catalog profile failed validation.
    #[error("catalog profile `{profile}`: {message}")]
    InvalidProfile { profile: String, message: String },

    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// An operation was called in a state its contract forbids.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("CSV output: {0}")]
    Csv(#[from] csv::Error),

    #[error("plot rendering: {0}")]
    Plot(String),

    #[error("configuration has {} violation(s):\n  {}", .0.len(), .0.join("\n  "))]
    Config(Vec<String>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
