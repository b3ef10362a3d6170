use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature index {index} exceeds problem dimension {dim}")]
    FeatureIndexOutOfRange { index: usize, dim: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("curvature matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("non-finite iterate in epoch {epoch}, inner step {step}")]
    NonFinite { epoch: usize, step: usize },

    #[error("epoch {t} outside schedule horizon 1..={horizon}")]
    EpochOutOfRange { t: usize, horizon: usize },

    #[error("audit premises unmet: {0}")]
    PremisesUnmet(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
