use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PtcError {
    #[error("index error: {0}")]
    Index(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("grid error in dimension {dim}: {reason}")]
    Grid { dim: usize, reason: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("numerical failure at iteration {iteration}: {reason}")]
    Numerical { iteration: usize, reason: String },

    #[error("capacity exceeded: {required} terms requested, budget is {budget}; use a threshold (tau) to enumerate a pruned set")]
    Capacity { required: u128, budget: u128 },
}

pub type Result<T> = std::result::Result<T, PtcError>;

impl PtcError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        PtcError::Argument(msg.into())
    }
}
