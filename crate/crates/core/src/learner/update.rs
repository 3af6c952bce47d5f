use alloc::vec::Vec;

use super::rollout::RolloutBatch;
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::norm;
use crate::policy::{accumulate_grad_log_prob, act_dist, log_prob, mean_kl, PolicyParams};

/// Step-size halvings tried before an update is declared stalled.
pub const MAX_HALVINGS: usize = 30;

/// Score-function gradient: mean over steps of `∇ log π(raw|s) · A`.
pub fn policy_gradient(
    batch: &RolloutBatch,
    advantages: &[f64],
    policy: &PolicyParams,
) -> Result<Vec<f64>> {
    ensure_dim("advantages", batch.num_steps(), advantages.len())?;
    let mut grad = alloc::vec![0.0; policy.num_params()];
    for (step, a) in batch.steps().zip(advantages) {
        accumulate_grad_log_prob(policy, &step.features, &step.raw, *a, &mut grad)?;
    }
    let n = advantages.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok(grad)
}

/// Importance-weighted surrogate `mean(π_new/π_old · A)` on raw actions.
pub fn surrogate(
    batch: &RolloutBatch,
    advantages: &[f64],
    old: &PolicyParams,
    new: &PolicyParams,
) -> Result<f64> {
    ensure_dim("advantages", batch.num_steps(), advantages.len())?;
    let mut total = 0.0;
    for (step, a) in batch.steps().zip(advantages) {
        let lp_new = log_prob(&act_dist(new, &step.features)?, &step.raw);
        let lp_old = log_prob(&act_dist(old, &step.features)?, &step.raw);
        total += libm::exp(lp_new - lp_old) * a;
    }
    Ok(total / advantages.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub params: PolicyParams,
    pub achieved_kl: f64,
    /// No step length satisfied the trust region; `params` is the old policy.
    pub stalled: bool,
}

/// Gradient ascent with backtracking until the mean KL over the batch
/// states is within `delta_kl`.
pub fn kl_constrained_update(
    policy: &PolicyParams,
    gradient: &[f64],
    batch: &RolloutBatch,
    delta_kl: f64,
) -> Result<UpdateOutcome> {
    if !(delta_kl > 0.0 && delta_kl.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "delta_kl",
            value: delta_kl,
        });
    }
    ensure_dim("gradient", policy.num_params(), gradient.len())?;
    let states = batch.features();
    let theta = policy.flatten();
    let mut alpha = 0.1 / (norm(gradient) + 1e-8);
    let mut candidate = theta.clone();
    for _ in 0..=MAX_HALVINGS {
        for ((c, t), g) in candidate.iter_mut().zip(&theta).zip(gradient) {
            *c = t + alpha * g;
        }
        if let Ok(next) = policy.with_flat(&candidate) {
            let next = next.with_std_floor();
            let kl = mean_kl(policy, &next, &states)?;
            if kl <= delta_kl {
                return Ok(UpdateOutcome {
                    params: next,
                    achieved_kl: kl,
                    stalled: false,
                });
            }
        }
        alpha *= 0.5;
    }
    Ok(UpdateOutcome {
        params: policy.clone(),
        achieved_kl: 0.0,
        stalled: true,
    })
}
