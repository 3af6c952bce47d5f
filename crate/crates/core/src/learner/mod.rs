//! Rollouts, advantage estimation and the KL-constrained policy update.

mod baseline;
mod gae;
mod rollout;
mod update;

pub use baseline::{fit_linear_baseline, LinearBaseline, ValueFunction, ZeroBaseline};
pub use gae::{discounted_returns, gae_advantages, gae_raw, normalize, GaeConfig};
pub use rollout::{collect, collect_episode, RolloutBatch, Step, Trajectory};
pub use update::{kl_constrained_update, policy_gradient, surrogate, UpdateOutcome, MAX_HALVINGS};
