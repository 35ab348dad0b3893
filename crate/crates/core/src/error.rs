use thiserror::Error;

/// Errors raised by the numerical core (gate math, network, optimizer,
/// schedule and metrics).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("backward called without a matching forward pass")]
    StaleCache,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("schedule query out of range: {0}")]
    Schedule(String),

    #[error("invalid metric input: {0}")]
    Metric(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
