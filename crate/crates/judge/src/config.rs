//! Judge endpoint configuration.

use serde::{Deserialize, Serialize};

use crate::error::JudgeError;

/// Connection and sampling parameters for the critique endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeConfig {
    /// Base URL of the OpenAI-compatible API, e.g. `http://host:8000/v1`.
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    /// Number of critiques sampled per rollout (k).
    pub num_critiques: usize,
    pub max_concurrent_requests: usize,
    /// Retries after the first attempt for transient failures.
    pub retry_limit: usize,
    /// Environment variable holding the bearer token.
    pub api_key_env_var: String,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".to_string(),
            model_name: "Qwen2.5-72B-Instruct".to_string(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 2048,
            num_critiques: 4,
            max_concurrent_requests: 4,
            retry_limit: 3,
            api_key_env_var: "CAPO_API_KEY".to_string(),
        }
    }
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.temperature < 0.0 {
            return Err(JudgeError::InvalidConfig("temperature must be >= 0".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(JudgeError::InvalidConfig("top_p must lie in (0, 1]".into()));
        }
        if self.num_critiques < 1 {
            return Err(JudgeError::InvalidConfig(
                "num_critiques must be >= 1".into(),
            ));
        }
        if self.max_concurrent_requests < 1 {
            return Err(JudgeError::InvalidConfig(
                "max_concurrent_requests must be >= 1".into(),
            ));
        }
        if self.base_url.is_empty() {
            return Err(JudgeError::InvalidConfig(
                "base_url must not be empty".into(),
            ));
        }
        Ok(())
    }
}
