//! Step-critique generation against an OpenAI-compatible endpoint.
//!
//! The judge receives a question, its ground truth, and the candidate
//! solution with every step wrapped in `<step_k>` markers. It answers
//! with a correctness verdict and, for incorrect solutions, the list of
//! erroneous step indices inside an `<incorrect_steps>` block. This crate
//! builds those prompts, issues the sampled completions with retry and
//! bounded concurrency, parses the answers into structured critiques, and
//! caches raw completions on disk so pipelines re-run without re-querying.

mod cache;
mod client;
mod config;
mod critique;
mod error;
mod prompt;

pub use cache::{cache_key, prompt_sha, CacheRecord, CritiqueCache};
pub use client::GenPrmClient;
pub use config::JudgeConfig;
pub use critique::{parse_critique, Critique, Judgment};
pub use error::JudgeError;
pub use prompt::{build_prompt, CRITIC_PROMPT_INSTRUCTION};
