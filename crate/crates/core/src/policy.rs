//! Tabular softmax policy over a fixed set of decision points.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// One independent softmax distribution per decision point, parameterized
/// by a logits matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy<S> {
    pub logits: Vec<Vec<S>>,
    pub learning_rate: S,
}

impl<S: Scalar> TabularPolicy<S> {
    /// Uniform policy: all logits zero.
    pub fn uniform(num_states: usize, num_actions: usize, learning_rate: S) -> Self {
        Self {
            logits: vec![vec![S::zero(); num_actions]; num_states],
            learning_rate,
        }
    }

    pub fn num_states(&self) -> usize {
        self.logits.len()
    }

    pub fn num_actions(&self) -> usize {
        self.logits.first().map(Vec::len).unwrap_or(0)
    }

    /// Softmax probabilities of one row.
    pub fn row_probs(&self, state: usize) -> Vec<S> {
        let row = &self.logits[state];
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let exps: Vec<S> = row.iter().map(|&x| (x - max).exp()).collect();
        let total: S = exps.iter().copied().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    /// Log-probability of an action, computed via a stable log-sum-exp.
    pub fn log_prob(&self, state: usize, action: usize) -> S {
        let row = &self.logits[state];
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let sum: S = row.iter().map(|&x| (x - max).exp()).sum();
        row[action] - max - sum.ln()
    }

    pub fn prob(&self, state: usize, action: usize) -> S {
        self.row_probs(state)[action]
    }

    /// Samples an action from the row's softmax distribution.
    pub fn sample<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        let probs = self.row_probs(state);
        let u: f64 = rng.random();
        let mut acc = 0.0f64;
        for (action, p) in probs.iter().enumerate() {
            acc += p.to_f64().unwrap_or(0.0);
            if u < acc {
                return action;
            }
        }
        probs.len() - 1
    }

    /// Gradient-ascent step: `logits += learning_rate * gradient`.
    pub fn ascend(&mut self, gradient: &[Vec<S>]) {
        debug_assert_eq!(gradient.len(), self.logits.len());
        for (row, grad_row) in self.logits.iter_mut().zip(gradient) {
            debug_assert_eq!(grad_row.len(), row.len());
            for (logit, &g) in row.iter_mut().zip(grad_row) {
                *logit += self.learning_rate * g;
            }
        }
    }
}
