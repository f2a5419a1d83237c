//! Aggregation of per-critique flagged-step sets into one decision.
//!
//! Each critique nominates a set of erroneous step indices. The vote
//! combines the k sets either into a binary flagged set (greedy,
//! intersection, union, majority) or into per-step penalty weights
//! (average, where a step flagged by c of k critiques gets weight c/k).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Strategy for combining k flagged-step sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteMode {
    /// Single greedy-decoded critique, taken as-is. Requires k == 1.
    Greedy,
    /// Steps flagged by all critiques.
    Intersection,
    /// Steps flagged by at least one critique.
    Union,
    /// Steps flagged by at least half of the critiques (count >= k/2, so
    /// an exact tie at even k counts as flagged).
    Majority,
    /// Continuous penalty weight count/k per step instead of a hard set.
    Average,
}

impl fmt::Display for VoteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            VoteMode::Greedy => "greedy",
            VoteMode::Intersection => "intersection",
            VoteMode::Union => "union",
            VoteMode::Majority => "majority",
            VoteMode::Average => "average",
        };
        f.write_str(name)
    }
}

impl FromStr for VoteMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" => Ok(VoteMode::Greedy),
            "intersection" => Ok(VoteMode::Intersection),
            "union" => Ok(VoteMode::Union),
            "majority" => Ok(VoteMode::Majority),
            "average" => Ok(VoteMode::Average),
            other => Err(format!("unknown vote mode: {other}")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VoteError {
    #[error("no critiques to vote on")]
    EmptyInput,
    #[error("greedy voting expects exactly one critique, got {0}")]
    GreedyNeedsSingle(usize),
}

/// Aggregated erroneous-step decision.
///
/// In the binary modes `weights` is the indicator of `flagged` (weight 1
/// for members, absent otherwise). In average mode `weights` holds the
/// per-step flag frequency and `flagged` is its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteResult<S> {
    pub mode: VoteMode,
    pub flagged: BTreeSet<usize>,
    pub weights: BTreeMap<usize, S>,
    pub effective_k: usize,
}

impl<S: Scalar> VoteResult<S> {
    /// Decision carrying no process signal, used when every critique for a
    /// rollout was unusable and the caller falls back to the outcome-only
    /// reward.
    pub fn outcome_only(mode: VoteMode) -> Self {
        Self {
            mode,
            flagged: BTreeSet::new(),
            weights: BTreeMap::new(),
            effective_k: 1,
        }
    }

    /// Penalty weight for a step: 1/0 in binary modes, count/k in average
    /// mode.
    pub fn penalty_weight(&self, step: usize) -> S {
        self.weights.get(&step).copied().unwrap_or_else(S::zero)
    }

    /// Largest referenced step index, if any step is referenced.
    pub fn max_step(&self) -> Option<usize> {
        let flagged_max = self.flagged.iter().next_back().copied();
        let weight_max = self.weights.keys().next_back().copied();
        flagged_max.max(weight_max)
    }
}

/// Combines k flagged-step sets under the given mode.
pub fn vote<S: Scalar>(
    sets: &[BTreeSet<usize>],
    mode: VoteMode,
) -> Result<VoteResult<S>, VoteError> {
    let k = sets.len();
    if k == 0 {
        return Err(VoteError::EmptyInput);
    }
    if mode == VoteMode::Greedy && k != 1 {
        return Err(VoteError::GreedyNeedsSingle(k));
    }

    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for set in sets {
        for &step in set {
            *counts.entry(step).or_insert(0) += 1;
        }
    }

    let flagged: BTreeSet<usize> = match mode {
        VoteMode::Greedy | VoteMode::Union | VoteMode::Average => counts.keys().copied().collect(),
        VoteMode::Intersection => counts
            .iter()
            .filter(|(_, &c)| c == k)
            .map(|(&s, _)| s)
            .collect(),
        VoteMode::Majority => counts
            .iter()
            .filter(|(_, &c)| 2 * c >= k)
            .map(|(&s, _)| s)
            .collect(),
    };

    let weights: BTreeMap<usize, S> = match mode {
        VoteMode::Average => counts
            .iter()
            .map(|(&s, &c)| (s, S::from_count(c) / S::from_count(k)))
            .collect(),
        _ => flagged.iter().map(|&s| (s, S::one())).collect(),
    };

    Ok(VoteResult {
        mode,
        flagged,
        weights,
        effective_k: k,
    })
}
