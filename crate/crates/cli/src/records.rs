//! JSONL record types and helpers shared by the pipeline commands.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use capo_core::rollout::{Question, Rollout};
use capo_core::voting::{VoteMode, VoteResult};
use capo_core::DefaultScalar;
use capo_judge::{Critique, Judgment};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One rollout as stored on disk. Spans are byte offsets; segmentation is
/// recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub question_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub old_logprobs: Vec<DefaultScalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_logprobs: Option<Vec<DefaultScalar>>,
    pub outcome_reward: DefaultScalar,
}

impl RolloutRecord {
    /// Validates the record and segments its text.
    pub fn into_rollout(self, delimiter: &str) -> Result<Rollout<DefaultScalar>, CliError> {
        let mut rollout = Rollout {
            question_id: self.question_id,
            text: self.text,
            tokens: self.tokens,
            old_logprobs: self.old_logprobs,
            ref_logprobs: self.ref_logprobs,
            outcome_reward: self.outcome_reward,
            steps: Default::default(),
        };
        rollout.validate()?;
        rollout.segment(delimiter)?;
        Ok(rollout)
    }
}

/// Output line of the judge/vote commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum JudgeLine {
    Critique(CritiqueRecord),
    Vote(VoteRecord),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CritiqueRecord {
    pub question_id: String,
    pub rollout_index: usize,
    pub sample_index: usize,
    pub raw_text: String,
    pub judgment: Judgment,
    pub flagged_steps: Vec<usize>,
}

impl CritiqueRecord {
    pub fn from_critique(
        question_id: &str,
        rollout_index: usize,
        sample_index: usize,
        critique: &Critique,
    ) -> Self {
        Self {
            question_id: question_id.to_string(),
            rollout_index,
            sample_index,
            raw_text: critique.raw_text.clone(),
            judgment: critique.judgment,
            flagged_steps: critique.flagged_steps.iter().copied().collect(),
        }
    }

    pub fn is_usable(&self) -> bool {
        self.judgment != Judgment::Unparseable
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoteRecord {
    pub question_id: String,
    pub rollout_index: usize,
    pub mode: VoteMode,
    pub flagged: Vec<usize>,
    pub weights: BTreeMap<usize, DefaultScalar>,
    pub effective_k: usize,
    /// True when no usable critique existed and the decision carries no
    /// process signal (outcome-only fallback).
    #[serde(default)]
    pub fallback: bool,
}

impl VoteRecord {
    pub fn from_result(
        question_id: &str,
        rollout_index: usize,
        result: &VoteResult<DefaultScalar>,
    ) -> Self {
        Self {
            question_id: question_id.to_string(),
            rollout_index,
            mode: result.mode,
            flagged: result.flagged.iter().copied().collect(),
            weights: result.weights.clone(),
            effective_k: result.effective_k,
            fallback: false,
        }
    }

    pub fn fallback(question_id: &str, rollout_index: usize, mode: VoteMode) -> Self {
        Self {
            question_id: question_id.to_string(),
            rollout_index,
            mode,
            flagged: Vec::new(),
            weights: BTreeMap::new(),
            effective_k: 0,
            fallback: true,
        }
    }

    pub fn to_result(&self) -> VoteResult<DefaultScalar> {
        if self.fallback {
            return VoteResult::outcome_only(self.mode);
        }
        VoteResult {
            mode: self.mode,
            flagged: self.flagged.iter().copied().collect(),
            weights: self.weights.clone(),
            effective_k: self.effective_k.max(1),
        }
    }
}

/// One scored rollout: token rewards and normalized advantages plus the
/// group statistics they were normalized with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub question_id: String,
    pub rollout_index: usize,
    pub token_rewards: Vec<DefaultScalar>,
    pub advantages: Vec<DefaultScalar>,
    pub group_mean: DefaultScalar,
    pub group_std: DefaultScalar,
    pub degenerate: bool,
}

/// Reads a JSONL file, reporting the first malformed line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::validation(format!("cannot open {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (number, line) in BufReader::new(file).lines().enumerate() {
        let line = line
            .map_err(|e| CliError::validation(format!("{}:{}: {e}", path.display(), number + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| CliError::validation(format!("{}:{}: {e}", path.display(), number + 1)))?;
        records.push(record);
    }
    Ok(records)
}

/// Writes records as JSONL to a file, or to stdout when no path is given.
pub fn write_jsonl<T: Serialize>(records: &[T], path: Option<&Path>) -> Result<(), CliError> {
    let mut body = String::new();
    for record in records {
        body.push_str(&serde_json::to_string(record).expect("record serializes"));
        body.push('\n');
    }
    match path {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, body)?;
        }
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
        }
    }
    Ok(())
}

/// Groups rollouts by question in first-appearance order; the index of a
/// rollout within its question group is its stable join key.
pub fn group_rollouts(records: Vec<RolloutRecord>) -> Vec<(String, Vec<RolloutRecord>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<RolloutRecord>> = BTreeMap::new();
    for record in records {
        if !groups.contains_key(&record.question_id) {
            order.push(record.question_id.clone());
        }
        groups
            .entry(record.question_id.clone())
            .or_default()
            .push(record);
    }
    order
        .into_iter()
        .map(|qid| {
            let group = groups.remove(&qid).expect("group exists");
            (qid, group)
        })
        .collect()
}

/// Indexes questions by id, rejecting duplicate ids and empty prompts.
pub fn index_questions(questions: &[Question]) -> Result<BTreeMap<&str, &Question>, CliError> {
    let mut index = BTreeMap::new();
    for question in questions {
        if question.prompt.trim().is_empty() {
            return Err(CliError::validation(format!(
                "question {} has an empty prompt",
                question.id
            )));
        }
        if index.insert(question.id.as_str(), question).is_some() {
            return Err(CliError::validation(format!(
                "duplicate question id {}",
                question.id
            )));
        }
    }
    Ok(index)
}
