//! Group-relative advantages and the clipped surrogate objective.
//!
//! Advantages normalize per-token rewards against the pooled mean and
//! population standard deviation of every token in the rollout group, so
//! rollouts contribute in proportion to their length. The surrogate is the
//! PPO-style clipped importance-weighted objective with a per-token k3
//! estimate of the KL divergence from a frozen reference policy, averaged
//! per rollout and then across the group.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::TabularPolicy;
use crate::rewards::TokenRewards;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("KL coefficient is positive but reference log-probabilities are missing")]
    MissingRef,
}

/// Clip range and KL coefficient of the surrogate objective.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObjectiveConfig<S> {
    pub eps_clip: S,
    pub beta_kl: S,
}

impl<S: Scalar> Default for ObjectiveConfig<S> {
    fn default() -> Self {
        Self {
            eps_clip: S::from_f64_const(0.2),
            beta_kl: S::from_f64_const(1e-2),
        }
    }
}

/// Normalized per-token advantages of one rollout group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageBatch<S> {
    /// One advantage vector per rollout, aligned with its tokens.
    pub advantages: Vec<Vec<S>>,
    pub group_mean: S,
    pub group_std: S,
    /// True when the pooled variance fell below the epsilon threshold; all
    /// advantages are exactly zero in that case.
    pub degenerate: bool,
}

/// Value decomposition of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<S> {
    /// Clipped surrogate term (to maximize).
    pub surrogate: S,
    /// Mean per-token k3 KL estimate, non-negative.
    pub kl_penalty: S,
    /// `surrogate - beta_kl * kl_penalty`.
    pub total_objective: S,
    /// Fraction of tokens where the clipped branch of the min was active.
    pub clip_fraction: S,
}

/// Normalizes a group of token-reward vectors into advantages using the
/// pooled mean and population standard deviation over all tokens of all
/// rollouts. Variance below `eps` marks the batch degenerate and zeroes
/// every advantage.
pub fn normalize_advantages<S: Scalar>(group: &[TokenRewards<S>], eps: S) -> AdvantageBatch<S> {
    let total: usize = group.iter().map(TokenRewards::len).sum();
    if total == 0 {
        return AdvantageBatch {
            advantages: group.iter().map(|_| Vec::new()).collect(),
            group_mean: S::zero(),
            group_std: S::zero(),
            degenerate: true,
        };
    }
    let count = S::from_count(total);
    let mean = group
        .iter()
        .flat_map(|r| r.values.iter().copied())
        .sum::<S>()
        / count;
    let var = group
        .iter()
        .flat_map(|r| r.values.iter().map(|&x| (x - mean) * (x - mean)))
        .sum::<S>()
        / count;
    let std = var.sqrt();
    let degenerate = std < eps;
    let advantages = group
        .iter()
        .map(|r| {
            r.values
                .iter()
                .map(|&x| {
                    if degenerate {
                        S::zero()
                    } else {
                        (x - mean) / std
                    }
                })
                .collect()
        })
        .collect();
    AdvantageBatch {
        advantages,
        group_mean: mean,
        group_std: std,
        degenerate,
    }
}

/// Group-relative advantage over outcome rewards alone: each rollout gets
/// one scalar, normalized against the group mean and population standard
/// deviation, which the caller broadcasts to all of the rollout's tokens.
/// Standard deviation below `eps` yields all zeros.
pub fn grpo_advantage<S: Scalar>(outcome_rewards: &[S], eps: S) -> Vec<S> {
    let n = outcome_rewards.len();
    if n == 0 {
        return Vec::new();
    }
    let count = S::from_count(n);
    let mean = outcome_rewards.iter().copied().sum::<S>() / count;
    let var = outcome_rewards
        .iter()
        .map(|&r| (r - mean) * (r - mean))
        .sum::<S>()
        / count;
    let std = var.sqrt();
    if std < eps {
        return vec![S::zero(); n];
    }
    outcome_rewards.iter().map(|&r| (r - mean) / std).collect()
}

/// Per-token k3 KL estimate `r - log r - 1` with `r = exp(ref - new)`,
/// computed as `expm1(d) - d` to stay non-negative under rounding.
pub fn k3_divergence<S: Scalar>(new_logprob: S, ref_logprob: S) -> S {
    let d = ref_logprob - new_logprob;
    d.exp_m1() - d
}

/// Evaluates the clipped surrogate objective with the KL penalty.
///
/// Per token: `ratio = exp(new - old)` and the contribution is
/// `min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)`. Contributions
/// are averaged over each rollout's tokens and then across rollouts; the
/// KL estimate is averaged the same way.
pub fn capo_objective<S: Scalar>(
    new_logprobs: &[Vec<S>],
    old_logprobs: &[Vec<S>],
    ref_logprobs: Option<&[Vec<S>]>,
    advantages: &[Vec<S>],
    cfg: &ObjectiveConfig<S>,
) -> Result<LossBreakdown<S>, ObjectiveError> {
    let n = new_logprobs.len();
    if n == 0 {
        return Err(ObjectiveError::ShapeMismatch("empty rollout group".into()));
    }
    if old_logprobs.len() != n || advantages.len() != n {
        return Err(ObjectiveError::ShapeMismatch(format!(
            "group sizes disagree: new={n}, old={}, adv={}",
            old_logprobs.len(),
            advantages.len()
        )));
    }
    let use_kl = cfg.beta_kl > S::zero();
    if use_kl && ref_logprobs.is_none() {
        return Err(ObjectiveError::MissingRef);
    }
    if let Some(refs) = ref_logprobs {
        if refs.len() != n {
            return Err(ObjectiveError::ShapeMismatch(format!(
                "group sizes disagree: new={n}, ref={}",
                refs.len()
            )));
        }
    }

    let low = S::one() - cfg.eps_clip;
    let high = S::one() + cfg.eps_clip;
    let mut surrogate = S::zero();
    let mut kl = S::zero();
    let mut clipped_tokens = 0usize;
    let mut total_tokens = 0usize;

    for i in 0..n {
        let len = new_logprobs[i].len();
        if len == 0 || old_logprobs[i].len() != len || advantages[i].len() != len {
            return Err(ObjectiveError::ShapeMismatch(format!(
                "rollout {i}: new={len}, old={}, adv={}",
                old_logprobs[i].len(),
                advantages[i].len()
            )));
        }
        if let Some(refs) = ref_logprobs {
            if refs[i].len() != len {
                return Err(ObjectiveError::ShapeMismatch(format!(
                    "rollout {i}: new={len}, ref={}",
                    refs[i].len()
                )));
            }
        }
        let mut surr_acc = S::zero();
        let mut kl_acc = S::zero();
        for t in 0..len {
            let adv = advantages[i][t];
            let ratio = (new_logprobs[i][t] - old_logprobs[i][t]).exp();
            let unclipped = ratio * adv;
            let clipped = ratio.max(low).min(high) * adv;
            surr_acc += unclipped.min(clipped);
            let clip_active = (adv > S::zero() && ratio > high) || (adv < S::zero() && ratio < low);
            if clip_active {
                clipped_tokens += 1;
            }
            if let Some(refs) = ref_logprobs {
                kl_acc += k3_divergence(new_logprobs[i][t], refs[i][t]);
            }
        }
        let len_s = S::from_count(len);
        surrogate += surr_acc / len_s;
        kl += kl_acc / len_s;
        total_tokens += len;
    }

    let n_s = S::from_count(n);
    let surrogate = surrogate / n_s;
    let kl_penalty = if ref_logprobs.is_some() {
        kl / n_s
    } else {
        S::zero()
    };
    Ok(LossBreakdown {
        surrogate,
        kl_penalty,
        total_objective: surrogate - cfg.beta_kl * kl_penalty,
        clip_fraction: S::from_count(clipped_tokens) / S::from_count(total_tokens),
    })
}

/// One rollout prepared for a policy update: the visited decision points,
/// the actions taken, frozen sampling-time and reference log-probabilities,
/// and the normalized advantages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub old_logprobs: Vec<S>,
    pub ref_logprobs: Option<Vec<S>>,
    pub advantages: Vec<S>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn check(&self, index: usize) -> Result<(), ObjectiveError> {
        let len = self.states.len();
        let ok = len > 0
            && self.actions.len() == len
            && self.old_logprobs.len() == len
            && self.advantages.len() == len
            && self
                .ref_logprobs
                .as_ref()
                .map(|r| r.len() == len)
                .unwrap_or(true);
        if ok {
            Ok(())
        } else {
            Err(ObjectiveError::ShapeMismatch(format!(
                "trajectory {index} is misaligned"
            )))
        }
    }

    /// Log-probabilities of the taken actions under the given policy.
    pub fn logprobs_under(&self, policy: &TabularPolicy<S>) -> Vec<S> {
        self.states
            .iter()
            .zip(&self.actions)
            .map(|(&s, &a)| policy.log_prob(s, a))
            .collect()
    }
}

/// Exact gradient of the clipped surrogate objective (including the KL
/// penalty) with respect to the tabular policy's logits.
///
/// Per token the surrogate contributes `adv * ratio * grad(log pi)` while
/// the unclipped branch is active, nothing once the clip binds; the KL
/// penalty contributes `-beta * (1 - exp(ref - new)) * grad(log pi)`. For a
/// softmax row, `grad(log pi(a))` is the one-hot of `a` minus the row's
/// probabilities.
pub fn capo_gradient<S: Scalar>(
    policy: &TabularPolicy<S>,
    group: &[Trajectory<S>],
    cfg: &ObjectiveConfig<S>,
) -> Result<Vec<Vec<S>>, ObjectiveError> {
    if group.is_empty() {
        return Err(ObjectiveError::ShapeMismatch("empty rollout group".into()));
    }
    let use_kl = cfg.beta_kl > S::zero();
    let mut grad = vec![vec![S::zero(); policy.num_actions()]; policy.num_states()];
    let low = S::one() - cfg.eps_clip;
    let high = S::one() + cfg.eps_clip;
    let n_s = S::from_count(group.len());

    for (i, traj) in group.iter().enumerate() {
        traj.check(i)?;
        if use_kl && traj.ref_logprobs.is_none() {
            return Err(ObjectiveError::MissingRef);
        }
        let weight = S::one() / (n_s * S::from_count(traj.len()));
        for t in 0..traj.len() {
            let state = traj.states[t];
            let action = traj.actions[t];
            let adv = traj.advantages[t];
            let new_lp = policy.log_prob(state, action);
            let ratio = (new_lp - traj.old_logprobs[t]).exp();
            let clip_active = (adv > S::zero() && ratio > high) || (adv < S::zero() && ratio < low);
            let mut coef = if clip_active { S::zero() } else { adv * ratio };
            if use_kl {
                let ref_lp = traj.ref_logprobs.as_ref().expect("checked above")[t];
                let r = (ref_lp - new_lp).exp();
                coef = coef - cfg.beta_kl * (S::one() - r);
            }
            let probs = policy.row_probs(state);
            for (a, &p) in probs.iter().enumerate() {
                let indicator = if a == action { S::one() } else { S::zero() };
                grad[state][a] += weight * coef * (indicator - p);
            }
        }
    }
    Ok(grad)
}
