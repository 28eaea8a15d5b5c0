//! Crate-wide error type and the exit-code classes the CLI maps it to.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("posterior update saw zero evidence: the observation has probability ~0 under every class")]
    ZeroEvidence,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("simplex grid needs {points} points, above the {bound}-point bound; lower --grid or use --policy fetana")]
    GridTooLarge { points: u128, bound: u64 },

    #[error("threshold training diverged: non-finite parameter at iteration {iteration}")]
    DivergenceDetected { iteration: u64 },

    #[error("cost evaluation over an empty batch")]
    EmptyBatch,

    #[error("dataset has no instances")]
    EmptyDataset,

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: line {line} has {got} columns, expected {expected}")]
    RaggedRows {
        path: PathBuf,
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("{path}:{line}: sparse feature indices must be strictly ascending")]
    NonAscendingIndex { path: PathBuf, line: usize },

    #[error("{got} instances are too few to split into {folds} folds")]
    TooFewInstances { got: usize, folds: usize },

    #[error("label error: {0}")]
    Label(String),

    #[error("model file reports version {got}, this build reads version {expected}")]
    ModelVersion { got: u32, expected: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("model encoding: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit-code class used by the CLI: 2 config, 3 data, 4 capacity.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            Error::GridTooLarge { .. } => 4,
            _ => 3,
        }
    }
}
