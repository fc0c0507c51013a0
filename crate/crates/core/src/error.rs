use thiserror::Error;

use crate::model::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("item {item} is already in the bundle")]
    ItemInBundle { item: usize },

    #[error("arity mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },

    #[error("malformed transfer path: {0}")]
    MalformedPath(String),

    #[error("invalid criterion {0:?}")]
    InvalidCriterion(String),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    #[error("enumeration needs {needed} allocations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("deadline exceeded")]
    Timeout,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by malformed input rather than resource limits.
    pub fn is_invalid_input(&self) -> bool {
        !matches!(self, Error::BudgetExceeded { .. } | Error::Timeout | Error::Io(_))
    }
}
