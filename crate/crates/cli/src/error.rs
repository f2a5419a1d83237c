//! CLI error type mapping failures to exit codes: 1 for validation
//! problems, 2 for external-service failures.

use std::process::ExitCode;

use capo_judge::JudgeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    External(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::External(_) => ExitCode::from(2),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation(message.into())
    }
}

impl From<JudgeError> for CliError {
    fn from(err: JudgeError) -> Self {
        match err {
            JudgeError::Auth(_) | JudgeError::Endpoint(_) => CliError::External(err.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<capo_core::rollout::RolloutError> for CliError {
    fn from(err: capo_core::rollout::RolloutError) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<capo_core::rewards::RewardError> for CliError {
    fn from(err: capo_core::rewards::RewardError) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<capo_core::voting::VoteError> for CliError {
    fn from(err: capo_core::voting::VoteError) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<capo_core::sim::SimError> for CliError {
    fn from(err: capo_core::sim::SimError) -> Self {
        CliError::Validation(err.to_string())
    }
}
