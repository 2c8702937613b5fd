use thiserror::Error;

use crate::wire::WireError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("{stage} training diverged at epoch {epoch}")]
    TrainingDiverged { stage: &'static str, epoch: usize },

    #[error("code capacity too small: C({slots}, {n}) must exceed vocabulary size {vocab}")]
    Capacity { slots: usize, n: usize, vocab: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("stale delta: device expects epoch {expected}, frame carries {got}")]
    StaleDelta { expected: u32, got: u32 },

    #[error("server/device divergence: {0}")]
    Divergence(String),

    #[error(transparent)]
    Wire(#[from] WireError),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
