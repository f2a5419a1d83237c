//! Error type shared across the judge crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("invalid judge configuration: {0}")]
    InvalidConfig(String),
    /// Authentication problems: missing key or a 401/403 answer.
    #[error("authentication failed: {0}")]
    Auth(String),
    /// The endpoint kept failing after all retries, or answered with a
    /// non-retryable error.
    #[error("judge endpoint error: {0}")]
    Endpoint(String),
    /// A caller violated an operation's precondition.
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    /// Neither a ground-truth solution nor an answer is available.
    #[error("no ground truth available for question {0}")]
    MissingGroundTruth(String),
    #[error("cache I/O error: {0}")]
    Cache(#[from] std::io::Error),
}
