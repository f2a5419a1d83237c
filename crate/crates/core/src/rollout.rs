//! Questions, sampled rollouts, and the step structure of a response.
//!
//! A response is partitioned into steps on a fixed delimiter (a blank line
//! by default). Tokens always arrive with the rollout (the engine never
//! tokenizes text itself) and are mapped onto steps by byte position.
//! Delimiter bytes are owned by the preceding step, so the byte ranges of
//! consecutive steps tile the whole text and every token has exactly one
//! owning step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Default step delimiter: a blank line.
pub const DEFAULT_STEP_DELIMITER: &str = "\n\n";

/// Errors from rollout validation and token/step mapping.
#[derive(Debug, Error)]
pub enum RolloutError {
    /// Concatenated tokens do not reproduce the rollout text.
    #[error("tokenization mismatch: tokens cover {token_bytes} bytes, text has {text_bytes}")]
    TokenizationMismatch {
        token_bytes: usize,
        text_bytes: usize,
    },
    /// Token and log-probability vectors disagree in length.
    #[error("length mismatch: {tokens} tokens vs {logprobs} log-probabilities")]
    LengthMismatch { tokens: usize, logprobs: usize },
    /// A log-probability is positive.
    #[error("log-probability at token {index} is positive: {value}")]
    PositiveLogprob { index: usize, value: f64 },
    /// The rollout has no tokens.
    #[error("rollout has no tokens")]
    Empty,
    /// Token spans have not been assigned yet.
    #[error("segmentation has no token spans; run map_tokens_to_steps first")]
    TokenSpansMissing,
}

/// Half-open range of byte or token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, index: usize) -> bool {
        index >= self.start && index < self.end
    }
}

/// A training question with its verifier ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub prompt: String,
    pub ground_truth_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_solution: Option<String>,
}

/// One reasoning step of a response.
///
/// `char_span` is the step's byte ownership range: ownership ranges of
/// consecutive steps tile the text, with delimiter bytes attached to the
/// preceding step. `content_span` is the step text itself, without the
/// surrounding delimiter bytes. `token_span` is filled by
/// [`map_tokens_to_steps`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub char_span: Span,
    pub content_span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_span: Option<Span>,
}

/// The step decomposition of one response text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub steps: Vec<Step>,
    pub delimiter: String,
}

impl Default for Segmentation {
    fn default() -> Self {
        Self {
            steps: Vec::new(),
            delimiter: DEFAULT_STEP_DELIMITER.to_string(),
        }
    }
}

impl Segmentation {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    /// Step index that owns the given token, once token spans are assigned.
    pub fn step_of_token(&self, token_index: usize) -> Option<usize> {
        self.steps
            .iter()
            .find(|s| {
                s.token_span
                    .map(|sp| sp.contains(token_index))
                    .unwrap_or(false)
            })
            .map(|s| s.index)
    }

    /// Flattens the token/step assignment into one step id per token.
    pub fn token_step_ids(&self, num_tokens: usize) -> Result<Vec<usize>, RolloutError> {
        let mut ids = vec![usize::MAX; num_tokens];
        for step in &self.steps {
            let span = step.token_span.ok_or(RolloutError::TokenSpansMissing)?;
            for slot in ids
                .iter_mut()
                .take(span.end.min(num_tokens))
                .skip(span.start)
            {
                *slot = step.index;
            }
        }
        if ids.contains(&usize::MAX) {
            return Err(RolloutError::TokenSpansMissing);
        }
        Ok(ids)
    }
}

/// One sampled response with its per-token log-probabilities under the
/// sampling policy, an optional reference-policy counterpart, and the
/// outcome reward from the rule-based verifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rollout<S> {
    pub question_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub old_logprobs: Vec<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_logprobs: Option<Vec<S>>,
    pub outcome_reward: S,
    #[serde(skip)]
    pub steps: Segmentation,
}

impl<S: Scalar> Rollout<S> {
    /// Number of tokens in the response.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks the structural invariants: at least one token, aligned vector
    /// lengths, non-positive log-probabilities, and tokens that concatenate
    /// back to the text.
    pub fn validate(&self) -> Result<(), RolloutError> {
        if self.tokens.is_empty() {
            return Err(RolloutError::Empty);
        }
        if self.tokens.len() != self.old_logprobs.len() {
            return Err(RolloutError::LengthMismatch {
                tokens: self.tokens.len(),
                logprobs: self.old_logprobs.len(),
            });
        }
        if let Some(ref_lp) = &self.ref_logprobs {
            if ref_lp.len() != self.tokens.len() {
                return Err(RolloutError::LengthMismatch {
                    tokens: self.tokens.len(),
                    logprobs: ref_lp.len(),
                });
            }
        }
        if let Some((index, value)) = self
            .old_logprobs
            .iter()
            .enumerate()
            .find(|(_, lp)| **lp > S::zero())
        {
            return Err(RolloutError::PositiveLogprob {
                index,
                value: value.to_f64().unwrap_or(f64::NAN),
            });
        }
        check_reconstruction(&self.text, &self.tokens)?;
        Ok(())
    }

    /// Segments the text and assigns tokens to steps.
    pub fn segment(&mut self, delimiter: &str) -> Result<(), RolloutError> {
        let seg = segment_steps(&self.text, delimiter);
        self.steps = map_tokens_to_steps(&self.text, &self.tokens, &seg)?;
        Ok(())
    }
}

fn check_reconstruction(text: &str, tokens: &[String]) -> Result<(), RolloutError> {
    let token_bytes: usize = tokens.iter().map(|t| t.len()).sum();
    let mut cursor = 0usize;
    let mut matches = token_bytes == text.len();
    if matches {
        for token in tokens {
            if !text.is_char_boundary(cursor) || !text[cursor..].starts_with(token.as_str()) {
                matches = false;
                break;
            }
            cursor += token.len();
        }
    }
    if !matches {
        return Err(RolloutError::TokenizationMismatch {
            token_bytes,
            text_bytes: text.len(),
        });
    }
    Ok(())
}

/// Splits `text` into steps on every occurrence of `delimiter`.
///
/// Empty fragments produced by consecutive delimiters are dropped. Byte
/// ownership ranges tile the full text: each step owns its fragment plus
/// any following delimiter bytes, and the first step also owns any leading
/// delimiter bytes. Text without any non-empty fragment (for example
/// delimiter-only text) yields a single step covering everything; empty
/// text yields no steps.
pub fn segment_steps(text: &str, delimiter: &str) -> Segmentation {
    let mut fragments: Vec<Span> = Vec::new();
    if !text.is_empty() {
        if delimiter.is_empty() {
            fragments.push(Span::new(0, text.len()));
        } else {
            let mut frag_start = 0usize;
            for (pos, m) in text.match_indices(delimiter) {
                if pos > frag_start {
                    fragments.push(Span::new(frag_start, pos));
                }
                frag_start = pos + m.len();
            }
            if frag_start < text.len() {
                fragments.push(Span::new(frag_start, text.len()));
            }
            if fragments.is_empty() {
                fragments.push(Span::new(0, text.len()));
            }
        }
    }

    let last = fragments.len().saturating_sub(1);
    let steps = fragments
        .iter()
        .enumerate()
        .map(|(i, frag)| {
            let own_start = if i == 0 { 0 } else { frag.start };
            let own_end = if i == last {
                text.len()
            } else {
                fragments[i + 1].start
            };
            Step {
                index: i,
                char_span: Span::new(own_start, own_end),
                content_span: *frag,
                token_span: None,
            }
        })
        .collect();

    Segmentation {
        steps,
        delimiter: delimiter.to_string(),
    }
}

/// Assigns each token to the step owning its first byte and fills the
/// per-step token spans, which then partition `[0, num_tokens)`.
pub fn map_tokens_to_steps(
    text: &str,
    tokens: &[String],
    segmentation: &Segmentation,
) -> Result<Segmentation, RolloutError> {
    check_reconstruction(text, tokens)?;
    let mut out = segmentation.clone();
    if out.steps.is_empty() {
        if tokens.is_empty() {
            return Ok(out);
        }
        return Err(RolloutError::TokenSpansMissing);
    }

    let mut step_starts = vec![tokens.len(); out.steps.len()];
    let mut cursor = 0usize;
    let mut step_idx = 0usize;
    for (j, token) in tokens.iter().enumerate() {
        while step_idx + 1 < out.steps.len() && !out.steps[step_idx].char_span.contains(cursor) {
            step_idx += 1;
        }
        if step_starts[step_idx] == tokens.len() {
            step_starts[step_idx] = step_starts[step_idx].min(j);
        }
        cursor += token.len();
    }

    // Steps that received no token get an empty span at the boundary.
    let mut next_start = tokens.len();
    for (i, step) in out.steps.iter_mut().enumerate().rev() {
        let start = if step_starts[i] == tokens.len() {
            next_start
        } else {
            step_starts[i]
        };
        step.token_span = Some(Span::new(start, next_start));
        next_start = start;
    }
    Ok(out)
}

/// Surrounds each step's content with `<step_k>` and `</step_k>` markers,
/// preserving all original delimiter bytes between the tagged blocks.
pub fn wrap_steps(segmentation: &Segmentation, text: &str) -> String {
    let mut out = String::with_capacity(text.len() + segmentation.num_steps() * 24);
    let mut cursor = 0usize;
    for step in &segmentation.steps {
        out.push_str(&text[cursor..step.content_span.start]);
        out.push_str(&format!("<step_{}>", step.index));
        out.push_str(&text[step.content_span.start..step.content_span.end]);
        out.push_str(&format!("</step_{}>", step.index));
        cursor = step.content_span.end;
    }
    out.push_str(&text[cursor..]);
    out
}

/// Removes all `<step_k>` and `</step_k>` markers, inverting [`wrap_steps`]
/// for texts that do not themselves contain `<step_` substrings.
pub fn strip_step_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut i = 0usize;
    while i < text.len() {
        if let Some(end) = step_tag_end(text, i) {
            i = end;
            continue;
        }
        let ch = text[i..].chars().next().expect("in bounds");
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

fn step_tag_end(text: &str, at: usize) -> Option<usize> {
    let rest = &text[at..];
    let after_prefix = rest
        .strip_prefix("</step_")
        .or_else(|| rest.strip_prefix("<step_"))?;
    let digits = after_prefix.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || !after_prefix[digits..].starts_with('>') {
        return None;
    }
    Some(at + (rest.len() - after_prefix.len()) + digits + 1)
}
