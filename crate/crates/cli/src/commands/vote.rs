//! `capo vote`: aggregate critique records into per-rollout decisions.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::config::EngineConfig;
use crate::error::CliError;
use crate::records::{read_jsonl, write_jsonl, CritiqueRecord, JudgeLine};

pub struct VoteArgs {
    pub critiques: PathBuf,
    pub vote: Option<String>,
    pub output: Option<PathBuf>,
}

pub fn run(args: &VoteArgs, engine: &EngineConfig) -> Result<(), CliError> {
    let mode = match &args.vote {
        Some(raw) => super::parse_vote_mode(raw)?,
        None => engine.vote_mode,
    };
    let lines: Vec<JudgeLine> = read_jsonl(&args.critiques)?;

    // Group critiques per rollout, preserving first-appearance order.
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut grouped: BTreeMap<(String, usize), Vec<CritiqueRecord>> = BTreeMap::new();
    for line in lines {
        if let JudgeLine::Critique(record) = line {
            let key = (record.question_id.clone(), record.rollout_index);
            if !grouped.contains_key(&key) {
                order.push(key.clone());
            }
            grouped.entry(key).or_default().push(record);
        }
    }
    if order.is_empty() {
        return Err(CliError::validation("no critique records in input"));
    }

    let mut output: Vec<JudgeLine> = Vec::new();
    for key in order {
        let mut critiques = grouped.remove(&key).expect("grouped above");
        critiques.sort_by_key(|c| c.sample_index);
        output.push(JudgeLine::Vote(super::judge::vote_rollout(
            &key.0, key.1, mode, &critiques,
        )));
    }
    write_jsonl(&output, args.output.as_deref())
}
