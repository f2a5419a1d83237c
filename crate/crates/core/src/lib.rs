//! Token-level credit assignment and group-relative policy optimization.
//!
//! The pipeline turns an outcome-verified rollout group into per-token
//! learning signals:
//!
//! 1. [`rollout`]: response texts, step segmentation on a delimiter, and
//!    the token-to-step mapping every later stage relies on.
//! 2. [`voting`]: aggregation of per-critique flagged-step sets into one
//!    decision (greedy, intersection, union, majority, or average
//!    weights).
//! 3. [`rewards`]: the token reward `r_v * C - flagged * P`, the format
//!    bonus, and the shaped outcome-judge reward of the baseline.
//! 4. [`objective`]: group-relative advantage normalization, the clipped
//!    surrogate objective with a k3 KL penalty, and its exact gradient for
//!    tabular policies.
//! 5. [`sim`]: a chain environment with a tabular softmax policy that
//!    exercises the full loop end to end under oracle or noisy judges.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the default `f64` precision used by the CLI.

pub mod objective;
pub mod policy;
pub mod rewards;
pub mod rollout;
pub mod scalar;
pub mod sim;
pub mod voting;

pub use scalar::Scalar;

/// Default scalar precision of the CLI and the simulator.
pub type DefaultScalar = f64;

pub type Rollout64 = rollout::Rollout<DefaultScalar>;
pub type VoteResult64 = voting::VoteResult<DefaultScalar>;
pub type RewardConfig64 = rewards::RewardConfig<DefaultScalar>;
pub type TokenRewards64 = rewards::TokenRewards<DefaultScalar>;
pub type AdvantageBatch64 = objective::AdvantageBatch<DefaultScalar>;
pub type LossBreakdown64 = objective::LossBreakdown<DefaultScalar>;
pub type ObjectiveConfig64 = objective::ObjectiveConfig<DefaultScalar>;
pub type TabularPolicy64 = policy::TabularPolicy<DefaultScalar>;
pub type TrainConfig64 = sim::TrainConfig<DefaultScalar>;
pub type MetricsTrace64 = sim::MetricsTrace<DefaultScalar>;
