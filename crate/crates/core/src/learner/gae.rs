use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::baseline::ValueFunction;
use super::rollout::{RolloutBatch, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaeConfig {
    pub gamma: f64,
    pub lambda_gae: f64,
}

impl Default for GaeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            lambda_gae: 0.98,
        }
    }
}

impl GaeConfig {
    pub fn new(gamma: f64, lambda_gae: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
            });
        }
        if !(0.0..=1.0).contains(&lambda_gae) {
            return Err(Error::InvalidParameter {
                name: "lambda_gae",
                value: lambda_gae,
            });
        }
        Ok(Self { gamma, lambda_gae })
    }
}

/// Discounted shaped return-to-go for every step of `traj`.
pub fn discounted_returns(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    let mut out = alloc::vec![0.0; traj.steps.len()];
    let mut acc = 0.0;
    for (o, s) in out.iter_mut().zip(&traj.steps).rev() {
        acc = s.shaped_reward + gamma * acc;
        *o = acc;
    }
    out
}

/// Unnormalized GAE(γ, λ) per trajectory. Episodes are treated as ending
/// with zero value after their last recorded step.
pub fn gae_raw<V: ValueFunction + ?Sized>(
    batch: &RolloutBatch,
    cfg: &GaeConfig,
    baseline: &V,
) -> Vec<Vec<f64>> {
    batch
        .trajectories()
        .iter()
        .map(|traj| {
            let values: Vec<f64> = traj
                .steps
                .iter()
                .enumerate()
                .map(|(t, s)| baseline.value(&s.features, t))
                .collect();
            let mut adv = alloc::vec![0.0; values.len()];
            let mut acc = 0.0;
            for t in (0..values.len()).rev() {
                let next = values.get(t + 1).copied().unwrap_or(0.0);
                let delta = traj.steps[t].shaped_reward + cfg.gamma * next - values[t];
                acc = delta + cfg.gamma * cfg.lambda_gae * acc;
                adv[t] = acc;
            }
            adv
        })
        .collect()
}

/// Shifts to zero mean and scales to unit variance; constant input only
/// gets centred.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    for v in values.iter_mut() {
        *v -= mean;
        if std > 1e-12 {
            *v /= std;
        }
    }
}

/// Batch-normalized advantages, flattened in step order.
pub fn gae_advantages<V: ValueFunction + ?Sized>(
    batch: &RolloutBatch,
    cfg: &GaeConfig,
    baseline: &V,
) -> Vec<f64> {
    let mut flat: Vec<f64> = gae_raw(batch, cfg, baseline).into_iter().flatten().collect();
    normalize(&mut flat);
    flat
}
