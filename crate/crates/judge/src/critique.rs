//! Parsing judge outputs into structured critiques.
//!
//! Parsing is total: any input yields a critique, with unusable outputs
//! marked [`Judgment::Unparseable`] so voting can drop them instead of the
//! pipeline failing on a single bad generation.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Verdict extracted from a judge output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Judgment {
    Correct,
    Incorrect,
    Unparseable,
}

/// One parsed judge output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    pub raw_text: String,
    pub judgment: Judgment,
    pub flagged_steps: BTreeSet<usize>,
}

impl Critique {
    /// Critiques that carry no usable signal are excluded from voting.
    pub fn is_usable(&self) -> bool {
        self.judgment != Judgment::Unparseable
    }
}

fn digits_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+").expect("valid regex"))
}

/// Parses one raw judge output.
///
/// The verdict comes from the first `Judgment:`/`Judgement:` marker
/// (either spelling, any case): the text after the final `?` on that line,
/// or the next non-empty line when the marker line ends at the question.
/// A `Yes` yields a correct critique with no flags even if a block is
/// present, trusting the verdict. A `No` collects step indices from the
/// `<incorrect_steps>` blocks, accepting both bare integers and
/// `<step_k>` entries, deduplicated, with indices at or beyond
/// `num_steps` discarded; when no block yields an index the critique is
/// downgraded to unparseable.
pub fn parse_critique(raw: &str, num_steps: usize) -> Critique {
    let judgment = match find_verdict(raw) {
        Some(true) => Judgment::Correct,
        Some(false) => Judgment::Incorrect,
        None => Judgment::Unparseable,
    };
    if judgment != Judgment::Incorrect {
        return Critique {
            raw_text: raw.to_string(),
            judgment,
            flagged_steps: BTreeSet::new(),
        };
    }

    let flagged = incorrect_step_indices(raw, num_steps);
    if flagged.is_empty() {
        return Critique {
            raw_text: raw.to_string(),
            judgment: Judgment::Unparseable,
            flagged_steps: BTreeSet::new(),
        };
    }
    Critique {
        raw_text: raw.to_string(),
        judgment: Judgment::Incorrect,
        flagged_steps: flagged,
    }
}

fn find_verdict(raw: &str) -> Option<bool> {
    let mut lines = raw.lines();
    while let Some(line) = lines.next() {
        let lower = line.to_ascii_lowercase();
        let marker = lower.find("judgment:").or_else(|| lower.find("judgement:"));
        let Some(pos) = marker else { continue };
        let after_marker = &lower[pos..];
        let tail = match after_marker.rfind('?') {
            Some(q) => &after_marker[q + 1..],
            None => {
                let colon = after_marker.find(':').expect("marker contains a colon");
                &after_marker[colon + 1..]
            }
        };
        if let Some(verdict) = leading_yes_no(tail) {
            return Some(verdict);
        }
        // Verdict may sit on the following line.
        for next in lines.by_ref() {
            let trimmed = next.trim();
            if trimmed.is_empty() {
                continue;
            }
            return leading_yes_no(&trimmed.to_ascii_lowercase());
        }
        return None;
    }
    None
}

fn leading_yes_no(text: &str) -> Option<bool> {
    let word: String = text
        .trim_start_matches(|c: char| !c.is_ascii_alphabetic())
        .chars()
        .take_while(char::is_ascii_alphabetic)
        .collect();
    match word.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Collects step indices from the first `<incorrect_steps>` block that
/// yields any. Skipping index-free blocks tolerates outputs that echo
/// the prompt's empty placeholder block before answering.
fn incorrect_step_indices(raw: &str, num_steps: usize) -> BTreeSet<usize> {
    let open = "<incorrect_steps>";
    let close = "</incorrect_steps>";
    let mut cursor = 0usize;
    while let Some(found) = raw[cursor..].find(open) {
        let start = cursor + found + open.len();
        let Some(found) = raw[start..].find(close) else {
            break;
        };
        let end = start + found;
        let indices: BTreeSet<usize> = digits_re()
            .find_iter(&raw[start..end])
            .filter_map(|m| m.as_str().parse::<usize>().ok())
            .filter(|&step| step < num_steps)
            .collect();
        if !indices.is_empty() {
            return indices;
        }
        cursor = end + close.len();
    }
    BTreeSet::new()
}
