//! `capo score`: join rollouts with critiques or votes, apply the token
//! reward formula, and normalize advantages per question group.

use std::collections::BTreeMap;
use std::path::PathBuf;

use capo_core::objective::normalize_advantages;
use capo_core::rewards::{token_rewards, RewardConfig, TokenRewards};
use capo_core::rollout::DEFAULT_STEP_DELIMITER;
use capo_core::voting::{VoteMode, VoteResult};
use capo_core::DefaultScalar;

use crate::config::EngineConfig;
use crate::error::CliError;
use crate::records::{
    group_rollouts, read_jsonl, write_jsonl, CritiqueRecord, JudgeLine, ScoredRecord,
};

pub struct ScoreArgs {
    pub rollouts: PathBuf,
    pub critiques: PathBuf,
    pub w_whole: Option<f64>,
    pub w_process: Option<f64>,
    pub vote: Option<String>,
    pub allow_fallback: bool,
    pub output: Option<PathBuf>,
}

type RolloutKey = (String, usize);

pub fn run(args: &ScoreArgs, engine: &EngineConfig) -> Result<(), CliError> {
    let mut reward_cfg: RewardConfig<DefaultScalar> = engine.reward.to_reward_config();
    if let Some(c) = args.w_whole {
        reward_cfg.w_whole = c;
    }
    if let Some(p) = args.w_process {
        reward_cfg.w_process = p;
    }
    if let Some(warning) = reward_cfg.asymmetry_warning() {
        eprintln!("warning: {warning}");
    }
    let vote_override = args
        .vote
        .as_deref()
        .map(super::parse_vote_mode)
        .transpose()?;

    let judge_lines: Vec<JudgeLine> = read_jsonl(&args.critiques)?;
    let mut critiques: BTreeMap<RolloutKey, Vec<CritiqueRecord>> = BTreeMap::new();
    let mut votes: BTreeMap<RolloutKey, VoteResult<DefaultScalar>> = BTreeMap::new();
    for line in judge_lines {
        match line {
            JudgeLine::Critique(record) => critiques
                .entry((record.question_id.clone(), record.rollout_index))
                .or_default()
                .push(record),
            JudgeLine::Vote(record) => {
                votes.insert(
                    (record.question_id.clone(), record.rollout_index),
                    record.to_result(),
                );
            }
        }
    }

    let groups = group_rollouts(read_jsonl(&args.rollouts)?);
    let mut scored: Vec<ScoredRecord> = Vec::new();
    for (question_id, group) in groups {
        let mut group_rewards: Vec<TokenRewards<DefaultScalar>> = Vec::new();
        for (rollout_index, record) in group.iter().enumerate() {
            let rollout = record.clone().into_rollout(DEFAULT_STEP_DELIMITER)?;
            let key = (question_id.clone(), rollout_index);
            let decision = decide(
                &key,
                &critiques,
                &votes,
                vote_override,
                engine.vote_mode,
                args.allow_fallback,
            )?;
            group_rewards.push(token_rewards(&rollout, &decision, &reward_cfg)?);
        }
        let batch = normalize_advantages(&group_rewards, engine.objective.std_epsilon);
        for (rollout_index, (rewards, advantages)) in
            group_rewards.iter().zip(&batch.advantages).enumerate()
        {
            scored.push(ScoredRecord {
                question_id: question_id.clone(),
                rollout_index,
                token_rewards: rewards.values.clone(),
                advantages: advantages.clone(),
                group_mean: batch.group_mean,
                group_std: batch.group_std,
                degenerate: batch.degenerate,
            });
        }
    }
    write_jsonl(&scored, args.output.as_deref())
}

/// Resolves the flagged-step decision for one rollout: a recorded vote
/// wins unless a vote-mode override asks for a recount from critiques.
fn decide(
    key: &RolloutKey,
    critiques: &BTreeMap<RolloutKey, Vec<CritiqueRecord>>,
    votes: &BTreeMap<RolloutKey, VoteResult<DefaultScalar>>,
    vote_override: Option<VoteMode>,
    default_mode: VoteMode,
    allow_fallback: bool,
) -> Result<VoteResult<DefaultScalar>, CliError> {
    let recount = |mode: VoteMode| -> Option<VoteResult<DefaultScalar>> {
        critiques.get(key).map(|records| {
            let mut records = records.clone();
            records.sort_by_key(|c| c.sample_index);
            super::judge::vote_rollout(&key.0, key.1, mode, &records).to_result()
        })
    };
    let decision = match vote_override {
        Some(mode) => recount(mode).or_else(|| votes.get(key).cloned()),
        None => votes.get(key).cloned().or_else(|| recount(default_mode)),
    };
    match decision {
        Some(d) => Ok(d),
        None if allow_fallback => Ok(VoteResult::outcome_only(default_mode)),
        None => Err(CliError::validation(format!(
            "no critiques or votes for question {} rollout {}",
            key.0, key.1
        ))),
    }
}
