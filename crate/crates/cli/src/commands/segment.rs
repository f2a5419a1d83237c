//! `capo segment`: split a response text into steps and print step JSON.

use std::path::Path;

use capo_core::rollout::{segment_steps, wrap_steps, DEFAULT_STEP_DELIMITER};
use serde::Serialize;

use crate::error::CliError;

#[derive(Serialize)]
struct StepJson {
    index: usize,
    char_start: usize,
    char_end: usize,
    text: String,
}

#[derive(Serialize)]
struct SegmentJson {
    delimiter: String,
    num_steps: usize,
    steps: Vec<StepJson>,
    tagged_text: String,
}

pub fn run(input: &Path, delimiter: Option<&str>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", input.display())))?;
    if text.is_empty() {
        return Err(CliError::validation("input text is empty"));
    }
    let delimiter = delimiter
        .map(super::unescape_delimiter)
        .unwrap_or_else(|| DEFAULT_STEP_DELIMITER.to_string());
    let seg = segment_steps(&text, &delimiter);
    let output = SegmentJson {
        delimiter: delimiter.clone(),
        num_steps: seg.num_steps(),
        steps: seg
            .steps
            .iter()
            .map(|s| StepJson {
                index: s.index,
                char_start: s.char_span.start,
                char_end: s.char_span.end,
                text: text[s.content_span.start..s.content_span.end].to_string(),
            })
            .collect(),
        tagged_text: wrap_steps(&seg, &text),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&output).expect("serializable")
    );
    Ok(())
}
