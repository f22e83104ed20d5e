use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model spec: {0}")]
    Spec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("stale forward cache: {0}")]
    StaleCache(String),

    #[error("invalid optimizer config: {0}")]
    Optimizer(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty epoch: k = {k} selects no samples out of {n}")]
    EmptyEpoch { k: f64, n: usize },

    #[error("invalid augmentation policy: {0}")]
    Policy(String),

    #[error("cosine distance undefined for a zero-norm vector")]
    ZeroNorm,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("epoch {got} does not follow last recorded epoch {last}")]
    OutOfOrder { last: usize, got: usize },

    #[error("degenerate regression window: all epochs equal")]
    DegenerateWindow,

    #[error("invalid detector config: {0}")]
    Detector(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid cost input: {0}")]
    Cost(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("missing checkpoint for epoch {0}")]
    MissingCheckpoint(usize),

    #[error("invalid run config: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
