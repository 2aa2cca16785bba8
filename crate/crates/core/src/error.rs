//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by planning, service, and campaign operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The fluid service system has no finite tour time (utilization >= 1).
    #[error("infeasible system: utilization {utilization} >= 1")]
    InfeasibleSystem { utilization: f64 },

    /// A referenced entity (run id, planner name) does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
