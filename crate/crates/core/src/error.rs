use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: need at least 2 days, got {0}")]
    InsufficientData(usize),

    #[error("granularity mismatch: {left:?} vs {right:?} minutes")]
    GranularityMismatch { left: Option<u32>, right: Option<u32> },

    #[error("entity at {0} has no granular time; apply a granularity first")]
    Unsnapped(chrono::NaiveDateTime),

    #[error("no users found")]
    NoUsers,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
