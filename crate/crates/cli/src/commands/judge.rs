//! `capo judge`: build critic prompts for every rollout, fetch (or load
//! cached) critiques, parse them, and optionally vote per rollout.

use std::path::PathBuf;

use capo_core::rollout::{wrap_steps, Question, DEFAULT_STEP_DELIMITER};
use capo_core::voting::{vote, VoteMode};
use capo_core::DefaultScalar;
use capo_judge::{
    build_prompt, cache_key, parse_critique, prompt_sha, CritiqueCache, GenPrmClient,
};
use futures::stream::{self, StreamExt, TryStreamExt};

use crate::config::EngineConfig;
use crate::error::CliError;
use crate::records::{
    group_rollouts, index_questions, read_jsonl, write_jsonl, CritiqueRecord, JudgeLine, VoteRecord,
};

pub struct JudgeArgs {
    pub rollouts: PathBuf,
    pub questions: PathBuf,
    pub k: Option<usize>,
    pub vote: Option<String>,
    pub cache: Option<PathBuf>,
    pub offline: bool,
    pub allow_fallback: bool,
    pub output: Option<PathBuf>,
}

pub fn run(args: &JudgeArgs, engine: &EngineConfig) -> Result<(), CliError> {
    let questions: Vec<Question> = read_jsonl(&args.questions)?;
    let questions = index_questions(&questions)?;
    let groups = group_rollouts(read_jsonl(&args.rollouts)?);

    let k = args.k.unwrap_or(engine.k);
    if k == 0 {
        return Err(CliError::validation("k must be at least 1"));
    }
    let vote_mode = args
        .vote
        .as_deref()
        .map(super::parse_vote_mode)
        .transpose()?;
    let greedy = vote_mode == Some(VoteMode::Greedy);
    if greedy && k != 1 {
        return Err(CliError::validation(
            "greedy voting requires exactly one critique (k=1)",
        ));
    }

    let cache_path = args
        .cache
        .clone()
        .unwrap_or_else(|| PathBuf::from(&engine.paths.cache));
    let mut cache = CritiqueCache::open(&cache_path);
    let judge_config = engine.judge.to_judge_config(k);
    let temperature = if greedy {
        0.0
    } else {
        judge_config.temperature
    };

    let mut client: Option<GenPrmClient> = None;
    let mut runtime: Option<tokio::runtime::Runtime> = None;
    let mut lines: Vec<JudgeLine> = Vec::new();

    for (question_id, group) in groups {
        let question = questions.get(question_id.as_str()).ok_or_else(|| {
            CliError::validation(format!("rollout references unknown question {question_id}"))
        })?;
        for (rollout_index, record) in group.into_iter().enumerate() {
            let rollout = record.into_rollout(DEFAULT_STEP_DELIMITER)?;
            let num_steps = rollout.steps.num_steps();
            let tagged = wrap_steps(&rollout.steps, &rollout.text);
            let prompt = build_prompt(question, &tagged)?;
            let sha = prompt_sha(&prompt);

            let mut raws: Vec<Option<String>> = Vec::with_capacity(k);
            let mut missing: Vec<usize> = Vec::new();
            for sample_index in 0..k {
                let key = cache_key(
                    &prompt,
                    &judge_config.model_name,
                    temperature,
                    judge_config.top_p,
                    sample_index,
                );
                match cache.lookup(&key) {
                    Some(text) => raws.push(Some(text.to_string())),
                    None => {
                        raws.push(None);
                        missing.push(sample_index);
                    }
                }
            }

            if !missing.is_empty() {
                if args.offline {
                    return Err(CliError::validation(format!(
                        "cache at {} lacks {} critique(s) for question {question_id} \
                         rollout {rollout_index} and --offline is set",
                        cache_path.display(),
                        missing.len()
                    )));
                }
                if client.is_none() {
                    client = Some(GenPrmClient::new(judge_config.clone())?);
                    runtime = Some(
                        tokio::runtime::Builder::new_multi_thread()
                            .enable_all()
                            .build()
                            .map_err(|e| CliError::validation(e.to_string()))?,
                    );
                }
                let client_ref = client.as_ref().expect("created above");
                let rt = runtime.as_ref().expect("created above");
                let fetched: Result<Vec<String>, capo_judge::JudgeError> = rt.block_on(async {
                    stream::iter(
                        missing
                            .iter()
                            .map(|_| client_ref.request_single(&prompt, greedy)),
                    )
                    .buffered(judge_config.max_concurrent_requests)
                    .try_collect()
                    .await
                });
                match fetched {
                    Ok(texts) => {
                        for (&sample_index, text) in missing.iter().zip(&texts) {
                            let key = cache_key(
                                &prompt,
                                &judge_config.model_name,
                                temperature,
                                judge_config.top_p,
                                sample_index,
                            );
                            cache.store(&key, &sha, sample_index, text)?;
                            raws[sample_index] = Some(text.clone());
                        }
                    }
                    Err(err) if args.allow_fallback => {
                        eprintln!(
                            "warning: judge unavailable for question {question_id} rollout \
                             {rollout_index} ({err}); falling back to outcome-only"
                        );
                    }
                    Err(err) => return Err(err.into()),
                }
            }

            let critiques: Vec<CritiqueRecord> = raws
                .iter()
                .enumerate()
                .filter_map(|(sample_index, raw)| raw.as_ref().map(|r| (sample_index, r)))
                .map(|(sample_index, raw)| {
                    let critique = parse_critique(raw, num_steps);
                    CritiqueRecord::from_critique(
                        &question_id,
                        rollout_index,
                        sample_index,
                        &critique,
                    )
                })
                .collect();

            let vote_line =
                vote_mode.map(|mode| vote_rollout(&question_id, rollout_index, mode, &critiques));
            lines.extend(critiques.into_iter().map(JudgeLine::Critique));
            if let Some(record) = vote_line {
                lines.push(JudgeLine::Vote(record));
            }
        }
    }

    write_jsonl(&lines, args.output.as_deref())
}

/// Votes over the usable critiques of one rollout, falling back to the
/// outcome-only decision when none is usable.
pub fn vote_rollout(
    question_id: &str,
    rollout_index: usize,
    mode: VoteMode,
    critiques: &[CritiqueRecord],
) -> VoteRecord {
    let sets: Vec<std::collections::BTreeSet<usize>> = critiques
        .iter()
        .filter(|c| c.is_usable())
        .map(|c| c.flagged_steps.iter().copied().collect())
        .collect();
    match vote::<DefaultScalar>(&sets, mode) {
        Ok(result) => VoteRecord::from_result(question_id, rollout_index, &result),
        Err(_) => VoteRecord::fallback(question_id, rollout_index, mode),
    }
}
