//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A feature matrix contains NaN or infinity.
    #[error("non-finite feature value in row {row}")]
    NonFiniteFeature { row: usize },

    /// A precondition on an operation's inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A positive pair whose loss terms would sum over an empty negative set.
    #[error("positive pair ({i}, {j}) has no incident negative pair in the batch")]
    NoIncidentNegatives { i: usize, j: usize },

    /// Array shapes do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An optimizer step received a NaN or infinite gradient.
    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    /// The training loop produced a NaN or infinite loss value.
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    /// A dataset or checkpoint file failed to parse.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A run configuration is malformed or internally inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A checkpoint file is malformed or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
