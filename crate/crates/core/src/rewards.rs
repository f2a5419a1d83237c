//! Token-level reward assignment.
//!
//! Every token starts from the verifier outcome scaled by a whole-response
//! weight, and tokens inside flagged steps are penalized by a process
//! weight:
//!
//! ```text
//! R_t = r_v * w_whole - m(t) * w_process
//! ```
//!
//! where `m(t)` is 1 for tokens in flagged steps (binary vote modes) or the
//! step's penalty weight (average mode), and 0 otherwise. Keeping
//! `w_whole > w_process` guarantees that every token of a correct-answer
//! rollout outranks every token of an incorrect-answer one, so the outcome
//! stays the primary objective and process quality orders rollouts within
//! the same outcome.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rollout::Rollout;
use crate::scalar::Scalar;
use crate::voting::VoteResult;

#[derive(Debug, Error)]
pub enum RewardError {
    /// The vote references a step index outside the segmentation.
    #[error("vote references step {step} but the rollout has {num_steps} steps")]
    LengthMismatch { step: usize, num_steps: usize },
    /// The rollout's token/step assignment is missing.
    #[error("rollout has no token/step assignment: {0}")]
    Rollout(#[from] crate::rollout::RolloutError),
}

/// Weights of the token reward formula.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardConfig<S> {
    /// Scale of the outcome reward applied to every token (C).
    pub w_whole: S,
    /// Penalty subtracted from tokens inside flagged steps (P).
    pub w_process: S,
    /// Bonus added to the outcome reward when the response carries a boxed
    /// final answer. Zero disables the bonus.
    pub format_bonus: S,
    /// Degenerate-variance threshold used by advantage normalization.
    pub std_epsilon: S,
}

impl<S: Scalar> Default for RewardConfig<S> {
    fn default() -> Self {
        Self {
            w_whole: S::from_f64_const(2.0),
            w_process: S::one(),
            format_bonus: S::from_f64_const(0.2),
            std_epsilon: S::from_f64_const(1e-6),
        }
    }
}

impl<S: Scalar> RewardConfig<S> {
    pub fn new(w_whole: S, w_process: S) -> Self {
        Self {
            w_whole,
            w_process,
            ..Self::default()
        }
    }

    pub fn without_format_bonus(mut self) -> Self {
        self.format_bonus = S::zero();
        self
    }

    /// Warning (not an error) when the whole-response weight does not
    /// dominate the process penalty; such configurations are legal but lose
    /// the correct-answer-first reward ordering.
    pub fn asymmetry_warning(&self) -> Option<String> {
        (self.w_whole <= self.w_process).then(|| {
            format!(
                "w_whole ({}) <= w_process ({}): correct-answer rollouts no longer \
                 dominate incorrect ones in reward",
                self.w_whole, self.w_process
            )
        })
    }
}

/// Per-token rewards of one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRewards<S> {
    pub values: Vec<S>,
}

impl<S: Scalar> TokenRewards<S> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> S {
        if self.values.is_empty() {
            return S::zero();
        }
        self.values.iter().copied().sum::<S>() / S::from_count(self.values.len())
    }
}

/// True when the response carries a boxed final answer.
pub fn has_boxed_answer(text: &str) -> bool {
    text.contains("\\boxed{")
}

/// Outcome reward with the format bonus applied when earned.
pub fn effective_outcome<S: Scalar>(
    outcome_reward: S,
    format_ok: bool,
    cfg: &RewardConfig<S>,
) -> S {
    if format_ok {
        outcome_reward + cfg.format_bonus
    } else {
        outcome_reward
    }
}

/// Computes per-token rewards for a segmented rollout.
pub fn token_rewards<S: Scalar>(
    rollout: &Rollout<S>,
    vote: &VoteResult<S>,
    cfg: &RewardConfig<S>,
) -> Result<TokenRewards<S>, RewardError> {
    let step_ids = rollout.steps.token_step_ids(rollout.tokens.len())?;
    let outcome = effective_outcome(rollout.outcome_reward, has_boxed_answer(&rollout.text), cfg);
    token_rewards_for_steps(&step_ids, rollout.steps.num_steps(), outcome, vote, cfg)
}

/// Core of the token reward formula, shared by the rollout path and the
/// simulator (where each token is its own step).
pub fn token_rewards_for_steps<S: Scalar>(
    step_of_token: &[usize],
    num_steps: usize,
    outcome: S,
    vote: &VoteResult<S>,
    cfg: &RewardConfig<S>,
) -> Result<TokenRewards<S>, RewardError> {
    if let Some(step) = vote.max_step() {
        if step >= num_steps {
            return Err(RewardError::LengthMismatch { step, num_steps });
        }
    }
    let base = outcome * cfg.w_whole;
    let values = step_of_token
        .iter()
        .map(|&step| base - vote.penalty_weight(step) * cfg.w_process)
        .collect();
    Ok(TokenRewards { values })
}

/// Outcome reward shaping that blends the rule verifier's decision with a
/// generative outcome judge: `sigmoid(alpha * r_m) + (beta * r_v - 1)`.
/// Applied uniformly to all tokens of a rollout by the outcome-judge
/// baseline.
pub fn genorm_shaped_reward<S: Scalar>(r_v: S, r_m: S, alpha: S, beta_shape: S) -> S {
    sigmoid(alpha * r_m) + (beta_shape * r_v - S::one())
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}
