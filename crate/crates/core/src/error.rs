use thiserror::Error;

/// Errors raised by the likelihood, embedding, metric, neural and trial layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("non-finite likelihood at grid point {index} (theta = {theta:?})")]
    NonFinite { index: usize, theta: Vec<f64> },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        /// Checkpoints recorded before the failure.
        partial_log: Box<crate::neural::TrainLog>,
    },

    #[error("weights file malformed at {location}: {reason}")]
    WeightsFormat { location: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
