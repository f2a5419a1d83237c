//! Synthetic multi-step environment and training loop.
//!
//! The environment is a chain of decision points ("checkpoints"), each
//! with exactly one correct action. A rollout picks one action per
//! checkpoint; the outcome verifier checks only the final checkpoint, so a
//! rollout can reach the right answer through wrong intermediate steps and
//! vice versa. Each checkpoint is one step of one token, which isolates
//! credit assignment from tokenization concerns.
//!
//! Judges flag the checkpoints whose action was wrong: the oracle exactly,
//! the noisy judge with configurable false-positive and false-negative
//! rates. Training compares the token-level credit-assignment algorithm
//! against outcome-only baselines under identical seeds.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objective::{
    capo_gradient, capo_objective, grpo_advantage, normalize_advantages, ObjectiveConfig,
    Trajectory,
};
use crate::policy::TabularPolicy;
use crate::rewards::{genorm_shaped_reward, token_rewards_for_steps, RewardConfig, TokenRewards};
use crate::scalar::Scalar;
use crate::voting::{vote, VoteMode};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid environment: {0}")]
    InvalidEnv(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Vote(#[from] crate::voting::VoteError),
    #[error(transparent)]
    Reward(#[from] crate::rewards::RewardError),
    #[error(transparent)]
    Objective(#[from] crate::objective::ObjectiveError),
}

/// Chain of checkpoints, each with one correct action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEnv {
    pub num_checkpoints: usize,
    pub num_actions: usize,
    pub correct_actions: Vec<usize>,
}

impl ChainEnv {
    pub fn new(
        num_checkpoints: usize,
        num_actions: usize,
        correct_actions: Vec<usize>,
    ) -> Result<Self, SimError> {
        if num_checkpoints < 2 {
            return Err(SimError::InvalidEnv("need at least 2 checkpoints".into()));
        }
        if num_actions < 2 {
            return Err(SimError::InvalidEnv("need at least 2 actions".into()));
        }
        if correct_actions.len() != num_checkpoints {
            return Err(SimError::InvalidEnv(format!(
                "expected {} correct actions, got {}",
                num_checkpoints,
                correct_actions.len()
            )));
        }
        if correct_actions.iter().any(|&a| a >= num_actions) {
            return Err(SimError::InvalidEnv("correct action out of range".into()));
        }
        Ok(Self {
            num_checkpoints,
            num_actions,
            correct_actions,
        })
    }

    /// Environment with correct actions drawn from a seeded generator.
    pub fn seeded(num_checkpoints: usize, num_actions: usize, seed: u64) -> Result<Self, SimError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let correct = (0..num_checkpoints)
            .map(|_| rng.random_range(0..num_actions))
            .collect();
        Self::new(num_checkpoints, num_actions, correct)
    }
}

/// One sampled action chain with its log-probabilities at sampling time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRollout<S> {
    pub actions: Vec<usize>,
    pub old_logprobs: Vec<S>,
    /// True when the final checkpoint's action is correct.
    pub outcome: bool,
}

impl<S: Scalar> SimRollout<S> {
    pub fn outcome_reward(&self) -> S {
        if self.outcome {
            S::one()
        } else {
            S::zero()
        }
    }
}

/// Samples a group of rollouts from the current policy.
pub fn rollout_group<S: Scalar, R: Rng + ?Sized>(
    env: &ChainEnv,
    policy: &TabularPolicy<S>,
    group_size: usize,
    rng: &mut R,
) -> Vec<SimRollout<S>> {
    (0..group_size)
        .map(|_| {
            let mut actions = Vec::with_capacity(env.num_checkpoints);
            let mut logprobs = Vec::with_capacity(env.num_checkpoints);
            for state in 0..env.num_checkpoints {
                let action = policy.sample(state, rng);
                logprobs.push(policy.log_prob(state, action));
                actions.push(action);
            }
            let outcome =
                actions[env.num_checkpoints - 1] == env.correct_actions[env.num_checkpoints - 1];
            SimRollout {
                actions,
                old_logprobs: logprobs,
                outcome,
            }
        })
        .collect()
}

/// Flags exactly the checkpoints whose action is wrong.
pub fn oracle_judge<S: Scalar>(rollout: &SimRollout<S>, env: &ChainEnv) -> BTreeSet<usize> {
    rollout
        .actions
        .iter()
        .zip(&env.correct_actions)
        .enumerate()
        .filter(|(_, (taken, correct))| taken != correct)
        .map(|(step, _)| step)
        .collect()
}

/// Judge imperfection model: true errors are missed with the
/// false-negative rate and clean steps flagged with the false-positive
/// rate, independently per call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyJudge {
    pub false_positive_rate: f64,
    pub false_negative_rate: f64,
    pub rng_seed: u64,
}

impl NoisyJudge {
    pub fn validate(&self) -> Result<(), SimError> {
        let in_range = |x: f64| (0.0..1.0).contains(&x);
        if !in_range(self.false_positive_rate) || !in_range(self.false_negative_rate) {
            return Err(SimError::InvalidConfig(
                "judge noise rates must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Perturbs the oracle's flag set with the judge's noise rates, drawing
/// from the supplied generator so repeated calls give independent sets.
pub fn noisy_judge<S: Scalar, R: Rng + ?Sized>(
    rollout: &SimRollout<S>,
    env: &ChainEnv,
    judge: &NoisyJudge,
    rng: &mut R,
) -> BTreeSet<usize> {
    let truth = oracle_judge(rollout, env);
    let mut flagged = BTreeSet::new();
    for step in 0..env.num_checkpoints {
        let is_error = truth.contains(&step);
        let keep = if is_error {
            rng.random::<f64>() >= judge.false_negative_rate
        } else {
            rng.random::<f64>() < judge.false_positive_rate
        };
        if keep {
            flagged.insert(step);
        }
    }
    flagged
}

/// Judge used during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JudgeKind {
    Oracle,
    Noisy(NoisyJudge),
}

impl JudgeKind {
    fn flag<S: Scalar, R: Rng + ?Sized>(
        &self,
        rollout: &SimRollout<S>,
        env: &ChainEnv,
        rng: &mut R,
    ) -> BTreeSet<usize> {
        match self {
            JudgeKind::Oracle => oracle_judge(rollout, env),
            JudgeKind::Noisy(noisy) => noisy_judge(rollout, env, noisy, rng),
        }
    }

    /// Binary final-answer verdict used by the outcome-judge baseline:
    /// the oracle reproduces the verifier, the noisy judge flips it with
    /// its error rates.
    fn outcome_verdict<R: Rng + ?Sized>(&self, truth: bool, rng: &mut R) -> bool {
        match self {
            JudgeKind::Oracle => truth,
            JudgeKind::Noisy(noisy) => {
                if truth {
                    rng.random::<f64>() >= noisy.false_negative_rate
                } else {
                    rng.random::<f64>() < noisy.false_positive_rate
                }
            }
        }
    }
}

/// Training algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    /// Token-level credit assignment: critiques, voting, per-token rewards.
    Capo,
    /// Outcome-only group-relative baseline.
    Grpo,
    /// Outcome baseline with the shaped generative-judge reward.
    GrpoGenOrm,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Algo::Capo => "capo",
            Algo::Grpo => "grpo",
            Algo::GrpoGenOrm => "grpo-genorm",
        };
        f.write_str(name)
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "capo" => Ok(Algo::Capo),
            "grpo" => Ok(Algo::Grpo),
            "grpo-genorm" | "genorm" => Ok(Algo::GrpoGenOrm),
            other => Err(format!("unknown algorithm: {other}")),
        }
    }
}

/// All knobs of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig<S> {
    /// Rollouts sampled per iteration.
    pub group_size: usize,
    /// Critiques per rollout for the token-level algorithm.
    pub num_critiques: usize,
    pub vote_mode: VoteMode,
    pub reward: RewardConfig<S>,
    pub objective: ObjectiveConfig<S>,
    /// Degenerate-variance threshold for advantage normalization.
    pub std_epsilon: S,
    /// Clipped update passes per sampled group, with sampling-time
    /// log-probabilities frozen across the passes.
    pub mini_epochs: usize,
    pub learning_rate: S,
    /// Shaping parameters of the outcome-judge baseline.
    pub genorm_alpha: S,
    pub genorm_beta: S,
}

impl<S: Scalar> Default for TrainConfig<S> {
    fn default() -> Self {
        Self {
            group_size: 16,
            num_critiques: 4,
            vote_mode: VoteMode::Majority,
            reward: RewardConfig::default().without_format_bonus(),
            objective: ObjectiveConfig::default(),
            std_epsilon: S::from_f64_const(1e-6),
            mini_epochs: 4,
            learning_rate: S::from_f64_const(DEFAULT_LEARNING_RATE),
            genorm_alpha: S::one(),
            genorm_beta: S::one(),
        }
    }
}

/// Default step size of the tabular simulator, sized so a standard run
/// (16 rollouts, 300 iterations) sits in the regime where credit
/// assignment quality shows up in final accuracy rather than everything
/// saturating.
pub const DEFAULT_LEARNING_RATE: f64 = 0.02;

impl<S: Scalar> TrainConfig<S> {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.group_size < 2 {
            return Err(SimError::InvalidConfig(
                "group_size must be at least 2".into(),
            ));
        }
        if self.num_critiques < 1 {
            return Err(SimError::InvalidConfig(
                "num_critiques must be at least 1".into(),
            ));
        }
        if self.vote_mode == VoteMode::Greedy && self.num_critiques != 1 {
            return Err(SimError::InvalidConfig(
                "greedy voting requires exactly one critique".into(),
            ));
        }
        if self.mini_epochs < 1 {
            return Err(SimError::InvalidConfig(
                "mini_epochs must be at least 1".into(),
            ));
        }
        if self.learning_rate <= S::zero() {
            return Err(SimError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Metrics of one training iteration, recorded before the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord<S> {
    pub iteration: usize,
    /// Fraction of the sampled group with a correct final answer.
    pub train_accuracy: S,
    /// Exact probability of the correct final answer under the policy
    /// before this iteration's update.
    pub policy_accuracy: S,
    pub mean_response_length: S,
    pub mean_token_reward: S,
    /// Clipped-token fraction averaged over the mini-epoch passes.
    pub clip_fraction: S,
    /// Mean per-token KL estimate averaged over the mini-epoch passes.
    pub kl: S,
}

/// Per-iteration metrics of one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsTrace<S> {
    pub records: Vec<MetricsRecord<S>>,
}

impl<S: Scalar> MetricsTrace<S> {
    pub fn final_policy_accuracy(&self) -> Option<S> {
        self.records.last().map(|r| r.policy_accuracy)
    }

    pub fn final_train_accuracy(&self) -> Option<S> {
        self.records.last().map(|r| r.train_accuracy)
    }

    /// CSV rendering with one row per iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "iteration,train_accuracy,policy_accuracy,mean_response_length,\
             mean_token_reward,clip_fraction,kl\n",
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.iteration,
                r.train_accuracy,
                r.policy_accuracy,
                r.mean_response_length,
                r.mean_token_reward,
                r.clip_fraction,
                r.kl
            ));
        }
        out
    }
}

/// A finished run: the trained policy plus its metrics trace.
#[derive(Debug, Clone)]
pub struct TrainRun<S> {
    pub policy: TabularPolicy<S>,
    pub trace: MetricsTrace<S>,
}

/// Stable sub-seed derivation, so extending an experiment grid never
/// perturbs existing runs.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64 ^ master.wrapping_mul(0x9e3779b97f4a7c15);
    for byte in tag.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x100000001b3);
    }
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d049bb133111eb);
    h ^ (h >> 31)
}

/// Runs one seeded training loop and records per-iteration metrics.
///
/// Each iteration samples a group from the current policy, verifies
/// outcomes, derives advantages (judging and voting first for the
/// token-level algorithm), and applies the configured number of clipped
/// update passes with sampling-time log-probabilities frozen.
pub fn train<S: Scalar>(
    env: &ChainEnv,
    mut policy: TabularPolicy<S>,
    algo: Algo,
    judge: &JudgeKind,
    cfg: &TrainConfig<S>,
    iterations: usize,
    seed: u64,
) -> Result<TrainRun<S>, SimError> {
    cfg.validate()?;
    if let JudgeKind::Noisy(noisy) = judge {
        noisy.validate()?;
    }
    if policy.num_states() != env.num_checkpoints || policy.num_actions() != env.num_actions {
        return Err(SimError::InvalidConfig(
            "policy shape does not match the environment".into(),
        ));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let reference = policy.clone();
    let mut trace = MetricsTrace::default();
    let length = S::from_count(env.num_checkpoints);
    let final_state = env.num_checkpoints - 1;

    for iteration in 0..iterations {
        let group = rollout_group(env, &policy, cfg.group_size, &mut rng);
        let policy_accuracy = policy.prob(final_state, env.correct_actions[final_state]);
        let train_accuracy = group.iter().filter(|r| r.outcome).count();
        let train_accuracy = S::from_count(train_accuracy) / S::from_count(group.len());

        let (advantages, mean_token_reward) =
            advantages_for(algo, env, &group, judge, cfg, &mut rng)?;

        let trajectories: Vec<Trajectory<S>> = group
            .iter()
            .zip(advantages)
            .map(|(rollout, adv)| Trajectory {
                states: (0..env.num_checkpoints).collect(),
                actions: rollout.actions.clone(),
                old_logprobs: rollout.old_logprobs.clone(),
                ref_logprobs: Some(
                    rollout
                        .actions
                        .iter()
                        .enumerate()
                        .map(|(state, &action)| reference.log_prob(state, action))
                        .collect(),
                ),
                advantages: adv,
            })
            .collect();

        let mut clip_acc = S::zero();
        let mut kl_acc = S::zero();
        for _ in 0..cfg.mini_epochs {
            let new_logprobs: Vec<Vec<S>> = trajectories
                .iter()
                .map(|t| t.logprobs_under(&policy))
                .collect();
            let old: Vec<Vec<S>> = trajectories
                .iter()
                .map(|t| t.old_logprobs.clone())
                .collect();
            let refs: Vec<Vec<S>> = trajectories
                .iter()
                .map(|t| t.ref_logprobs.clone().expect("set above"))
                .collect();
            let adv: Vec<Vec<S>> = trajectories.iter().map(|t| t.advantages.clone()).collect();
            let breakdown = capo_objective(&new_logprobs, &old, Some(&refs), &adv, &cfg.objective)?;
            clip_acc += breakdown.clip_fraction;
            kl_acc += breakdown.kl_penalty;
            let gradient = capo_gradient(&policy, &trajectories, &cfg.objective)?;
            policy.ascend(&gradient);
        }

        let epochs = S::from_count(cfg.mini_epochs);
        trace.records.push(MetricsRecord {
            iteration,
            train_accuracy,
            policy_accuracy,
            mean_response_length: length,
            mean_token_reward,
            clip_fraction: clip_acc / epochs,
            kl: kl_acc / epochs,
        });
    }

    Ok(TrainRun { policy, trace })
}

/// Per-token advantages for one sampled group under the chosen algorithm,
/// together with the group's mean token reward.
fn advantages_for<S: Scalar>(
    algo: Algo,
    env: &ChainEnv,
    group: &[SimRollout<S>],
    judge: &JudgeKind,
    cfg: &TrainConfig<S>,
    rng: &mut ChaCha20Rng,
) -> Result<(Vec<Vec<S>>, S), SimError> {
    let length = env.num_checkpoints;
    let step_ids: Vec<usize> = (0..length).collect();
    match algo {
        Algo::Capo => {
            let mut reward_vecs: Vec<TokenRewards<S>> = Vec::with_capacity(group.len());
            for rollout in group {
                let sets: Vec<BTreeSet<usize>> = (0..cfg.num_critiques)
                    .map(|_| judge.flag(rollout, env, rng))
                    .collect();
                let decision = vote::<S>(&sets, cfg.vote_mode)?;
                reward_vecs.push(token_rewards_for_steps(
                    &step_ids,
                    length,
                    rollout.outcome_reward(),
                    &decision,
                    &cfg.reward,
                )?);
            }
            let mean = mean_of(&reward_vecs);
            let batch = normalize_advantages(&reward_vecs, cfg.std_epsilon);
            Ok((batch.advantages, mean))
        }
        Algo::Grpo => {
            let outcomes: Vec<S> = group.iter().map(SimRollout::outcome_reward).collect();
            let per_rollout = grpo_advantage(&outcomes, cfg.std_epsilon);
            let mean = outcomes.iter().copied().sum::<S>() / S::from_count(outcomes.len());
            Ok((broadcast(per_rollout, length), mean))
        }
        Algo::GrpoGenOrm => {
            let shaped: Vec<S> = group
                .iter()
                .map(|rollout| {
                    let verdict = judge.outcome_verdict(rollout.outcome, rng);
                    let r_m = if verdict { S::one() } else { S::zero() };
                    genorm_shaped_reward(
                        rollout.outcome_reward(),
                        r_m,
                        cfg.genorm_alpha,
                        cfg.genorm_beta,
                    )
                })
                .collect();
            let per_rollout = grpo_advantage(&shaped, cfg.std_epsilon);
            let mean = shaped.iter().copied().sum::<S>() / S::from_count(shaped.len());
            Ok((broadcast(per_rollout, length), mean))
        }
    }
}

fn broadcast<S: Scalar>(per_rollout: Vec<S>, length: usize) -> Vec<Vec<S>> {
    per_rollout.into_iter().map(|a| vec![a; length]).collect()
}

fn mean_of<S: Scalar>(rewards: &[TokenRewards<S>]) -> S {
    let total: usize = rewards.iter().map(TokenRewards::len).sum();
    if total == 0 {
        return S::zero();
    }
    rewards
        .iter()
        .flat_map(|r| r.values.iter().copied())
        .sum::<S>()
        / S::from_count(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_4x3() -> ChainEnv {
        ChainEnv::new(3, 4, vec![1, 2, 0]).unwrap()
    }

    fn oracle_policy(env: &ChainEnv) -> TabularPolicy<f64> {
        let mut policy = TabularPolicy::uniform(env.num_checkpoints, env.num_actions, 0.05);
        for (state, &correct) in env.correct_actions.iter().enumerate() {
            policy.logits[state][correct] = 1e3;
        }
        policy
    }

    #[test]
    fn deterministic_policy_yields_clean_rollouts() {
        let env = env_4x3();
        let policy = oracle_policy(&env);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let group = rollout_group(&env, &policy, 8, &mut rng);
        assert!(group.iter().all(|r| r.outcome));
        assert!(group.iter().all(|r| oracle_judge(r, &env).is_empty()));
    }

    #[test]
    fn uniform_policy_outcome_rate_matches_chance() {
        let env = ChainEnv::new(2, 4, vec![0, 3]).unwrap();
        let policy = TabularPolicy::<f64>::uniform(2, 4, 0.05);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let group = rollout_group(&env, &policy, 10_000, &mut rng);
        let hits = group.iter().filter(|r| r.outcome).count() as f64;
        let rate = hits / 10_000.0;
        // Binomial oracle: p = 1/4, 3 sigma = 3 * sqrt(p(1-p)/n).
        let bound = 3.0 * (0.25f64 * 0.75 / 10_000.0).sqrt();
        assert!(
            (rate - 0.25).abs() < bound,
            "rate {rate} outside {bound} of 0.25"
        );
    }

    #[test]
    fn rollout_groups_are_seed_deterministic() {
        let env = env_4x3();
        let policy = TabularPolicy::<f64>::uniform(3, 4, 0.05);
        let draw = |seed| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rollout_group(&env, &policy, 16, &mut rng)
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn oracle_flags_exactly_the_mismatches() {
        let env = env_4x3();
        let rollout = SimRollout {
            actions: vec![1, 0, 0],
            old_logprobs: vec![-1.0; 3],
            outcome: true,
        };
        assert_eq!(oracle_judge(&rollout, &env), [1usize].into_iter().collect());

        let all_wrong = SimRollout {
            actions: vec![0, 0, 1],
            old_logprobs: vec![-1.0; 3],
            outcome: false,
        };
        assert_eq!(
            oracle_judge(&all_wrong, &env),
            [0usize, 1, 2].into_iter().collect()
        );
    }

    #[test]
    fn oracle_flag_count_matches_brute_recount() {
        let env = env_4x3();
        let policy = TabularPolicy::<f64>::uniform(3, 4, 0.05);
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for rollout in rollout_group(&env, &policy, 200, &mut rng) {
            let mut mismatches = 0;
            for (step, &action) in rollout.actions.iter().enumerate() {
                if action != env.correct_actions[step] {
                    mismatches += 1;
                }
            }
            assert_eq!(oracle_judge(&rollout, &env).len(), mismatches);
        }
    }

    #[test]
    fn noiseless_judge_equals_oracle() {
        let env = env_4x3();
        let policy = TabularPolicy::<f64>::uniform(3, 4, 0.05);
        let judge = NoisyJudge {
            false_positive_rate: 0.0,
            false_negative_rate: 0.0,
            rng_seed: 0,
        };
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let group = rollout_group(&env, &policy, 1000, &mut rng);
        for rollout in &group {
            assert_eq!(
                noisy_judge(rollout, &env, &judge, &mut rng),
                oracle_judge(rollout, &env)
            );
        }
    }

    #[test]
    fn saturated_false_positives_flag_everything() {
        let env = env_4x3();
        let judge = NoisyJudge {
            false_positive_rate: 0.999_999,
            false_negative_rate: 0.0,
            rng_seed: 0,
        };
        let rollout = SimRollout {
            actions: vec![1, 0, 0],
            old_logprobs: vec![-1.0; 3],
            outcome: true,
        };
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let flagged = noisy_judge(&rollout, &env, &judge, &mut rng);
        assert_eq!(flagged.len(), env.num_checkpoints);
    }

    #[test]
    fn zero_iterations_change_nothing() {
        let env = env_4x3();
        let policy = TabularPolicy::<f64>::uniform(3, 4, 0.05);
        let run = train(
            &env,
            policy.clone(),
            Algo::Capo,
            &JudgeKind::Oracle,
            &TrainConfig::default(),
            0,
            9,
        )
        .unwrap();
        assert!(run.trace.records.is_empty());
        assert_eq!(run.policy, policy);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let env = env_4x3();
        let cfg = TrainConfig::default();
        let run = |seed| {
            train(
                &env,
                TabularPolicy::<f64>::uniform(3, 4, cfg.learning_rate),
                Algo::Capo,
                &JudgeKind::Oracle,
                &cfg,
                20,
                seed,
            )
            .unwrap()
        };
        let a = run(42);
        let b = run(42);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.policy, b.policy);
        let c = run(43);
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn rows_remain_distributions_after_training() {
        let env = env_4x3();
        let cfg = TrainConfig::default();
        let run = train(
            &env,
            TabularPolicy::<f64>::uniform(3, 4, cfg.learning_rate),
            Algo::Capo,
            &JudgeKind::Oracle,
            &cfg,
            50,
            7,
        )
        .unwrap();
        for state in 0..3 {
            let total: f64 = run.policy.row_probs(state).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_groups_leave_policy_unchanged_without_kl() {
        // An oracle policy keeps every reward identical, so advantages are
        // all zero; with beta = 0 the update must be a no-op.
        let env = env_4x3();
        let policy = oracle_policy(&env);
        let mut cfg = TrainConfig::<f64>::default();
        cfg.objective.beta_kl = 0.0;
        let run = train(
            &env,
            policy.clone(),
            Algo::Capo,
            &JudgeKind::Oracle,
            &cfg,
            5,
            1,
        )
        .unwrap();
        assert_eq!(run.policy.logits, policy.logits);
    }

    #[test]
    fn greedy_vote_with_multiple_critiques_is_a_config_error() {
        let cfg = TrainConfig::<f64> {
            vote_mode: VoteMode::Greedy,
            num_critiques: 4,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn derive_seed_is_stable_and_tag_sensitive() {
        let a = derive_seed(0, "capo/seed=0");
        assert_eq!(a, derive_seed(0, "capo/seed=0"));
        assert_ne!(a, derive_seed(0, "capo/seed=1"));
        assert_ne!(a, derive_seed(1, "capo/seed=0"));
    }

    #[test]
    fn csv_has_one_row_per_iteration() {
        let env = env_4x3();
        let cfg = TrainConfig::default();
        let run = train(
            &env,
            TabularPolicy::<f64>::uniform(3, 4, cfg.learning_rate),
            Algo::Grpo,
            &JudgeKind::Oracle,
            &cfg,
            4,
            2,
        )
        .unwrap();
        let csv = run.trace.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("iteration,train_accuracy"));
    }
}
