//! Engine configuration file: TOML sections with documented defaults.
//! Unknown keys are rejected. Command-line flags override file values.

use std::path::Path;

use capo_core::objective::ObjectiveConfig;
use capo_core::rewards::RewardConfig;
use capo_core::sim::DEFAULT_LEARNING_RATE;
use capo_core::voting::VoteMode;
use capo_core::DefaultScalar;
use capo_judge::JudgeConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Aggregation mode applied when voting on critiques.
    pub vote_mode: VoteMode,
    /// Critiques sampled per rollout (k).
    pub k: usize,
    pub judge: JudgeSection,
    pub reward: RewardSection,
    pub objective: ObjectiveSection,
    pub sim: SimSection,
    pub paths: PathsSection,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            vote_mode: VoteMode::Majority,
            k: 4,
            judge: JudgeSection::default(),
            reward: RewardSection::default(),
            objective: ObjectiveSection::default(),
            sim: SimSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl EngineConfig {
    /// Loads the file when given, otherwise the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeSection {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub max_concurrent_requests: usize,
    pub retry_limit: usize,
    pub api_key_env_var: String,
}

impl Default for JudgeSection {
    fn default() -> Self {
        let judge = JudgeConfig::default();
        Self {
            base_url: judge.base_url,
            model_name: judge.model_name,
            temperature: judge.temperature,
            top_p: judge.top_p,
            max_tokens: judge.max_tokens,
            max_concurrent_requests: judge.max_concurrent_requests,
            retry_limit: judge.retry_limit,
            api_key_env_var: judge.api_key_env_var,
        }
    }
}

impl JudgeSection {
    pub fn to_judge_config(&self, num_critiques: usize) -> JudgeConfig {
        JudgeConfig {
            base_url: self.base_url.clone(),
            model_name: self.model_name.clone(),
            temperature: self.temperature,
            top_p: self.top_p,
            max_tokens: self.max_tokens,
            num_critiques,
            max_concurrent_requests: self.max_concurrent_requests,
            retry_limit: self.retry_limit,
            api_key_env_var: self.api_key_env_var.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub w_whole: f64,
    pub w_process: f64,
    pub format_bonus: f64,
    pub std_epsilon: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        let cfg = RewardConfig::<DefaultScalar>::default();
        Self {
            w_whole: cfg.w_whole,
            w_process: cfg.w_process,
            format_bonus: cfg.format_bonus,
            std_epsilon: cfg.std_epsilon,
        }
    }
}

impl RewardSection {
    pub fn to_reward_config(&self) -> RewardConfig<DefaultScalar> {
        RewardConfig {
            w_whole: self.w_whole,
            w_process: self.w_process,
            format_bonus: self.format_bonus,
            std_epsilon: self.std_epsilon,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    pub eps_clip: f64,
    pub beta_kl: f64,
    pub std_epsilon: f64,
    pub mini_epochs: usize,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        let cfg = ObjectiveConfig::<DefaultScalar>::default();
        Self {
            eps_clip: cfg.eps_clip,
            beta_kl: cfg.beta_kl,
            std_epsilon: 1e-6,
            mini_epochs: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub checkpoints: usize,
    pub actions: usize,
    pub group_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub judge_false_positive: f64,
    pub judge_false_negative: f64,
    pub answer_seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            checkpoints: 6,
            actions: 4,
            group_size: 16,
            iterations: 300,
            learning_rate: DEFAULT_LEARNING_RATE,
            judge_false_positive: 0.0,
            judge_false_negative: 0.0,
            answer_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Critique cache location.
    pub cache: String,
    /// Output directory for simulation traces and summaries.
    pub output_dir: String,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            cache: "critique_cache.jsonl".to_string(),
            output_dir: "out".to_string(),
        }
    }
}
