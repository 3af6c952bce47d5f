use alloc::vec::Vec;

use rand::Rng;

use crate::env::{is_violation, penalized_reward, Environment, SafetySpec};
use crate::error::{Error, Result};
use crate::policy::{act_dist, clamp, sample_raw, PolicyParams};

/// One environment transition as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub features: Vec<f64>,
    pub raw: Vec<f64>,
    pub applied: Vec<f64>,
    pub shaped_reward: f64,
    pub base_reward: f64,
    /// Safety value of the state reached by this step.
    pub safety_value: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub t_lim: f64,
    /// Steps lost to a numerical fault; each one counts as a violation.
    pub faulted_steps: usize,
}

impl Trajectory {
    pub fn shaped_return(&self) -> f64 {
        self.steps.iter().map(|s| s.shaped_reward).sum()
    }

    pub fn base_return(&self) -> f64 {
        self.steps.iter().map(|s| s.base_reward).sum()
    }

    pub fn violations(&self) -> usize {
        self.steps.iter().filter(|s| s.violation).count() + self.faulted_steps
    }

    pub fn timesteps(&self) -> usize {
        self.steps.len() + self.faulted_steps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    trajectories: Vec<Trajectory>,
    t_lim: Option<f64>,
}

impl RolloutBatch {
    /// Batch collected under one torque limit.
    pub fn new(trajectories: Vec<Trajectory>, t_lim: f64) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::Empty("rollout batch"));
        }
        if trajectories.iter().any(|t| t.t_lim != t_lim) {
            return Err(Error::Config("trajectories in a batch must share t_lim"));
        }
        Ok(Self {
            trajectories,
            t_lim: Some(t_lim),
        })
    }

    /// Batch whose episodes ran under different limits (pre-training).
    pub fn mixed(trajectories: Vec<Trajectory>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::Empty("rollout batch"));
        }
        Ok(Self {
            trajectories,
            t_lim: None,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn t_lim(&self) -> Option<f64> {
        self.t_lim
    }

    pub fn steps(&self) -> impl Iterator<Item = &Step> {
        self.trajectories.iter().flat_map(|t| t.steps.iter())
    }

    pub fn num_steps(&self) -> usize {
        self.trajectories.iter().map(|t| t.steps.len()).sum()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.steps().map(|s| s.features.as_slice()).collect()
    }

    pub fn mean_shaped_return(&self) -> f64 {
        let n = self.trajectories.len() as f64;
        self.trajectories.iter().map(Trajectory::shaped_return).sum::<f64>() / n
    }

    pub fn mean_base_return(&self) -> f64 {
        let n = self.trajectories.len() as f64;
        self.trajectories.iter().map(Trajectory::base_return).sum::<f64>() / n
    }
}

/// Runs one episode of at most `horizon` steps under `t_lim`.
pub fn collect_episode<E: Environment, R: Rng + ?Sized>(
    env: &E,
    policy: &PolicyParams,
    spec: &SafetySpec,
    t_lim: f64,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(t_lim > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_lim",
            value: t_lim,
        });
    }
    let mut state = env.reset(rng);
    let mut traj = Trajectory {
        steps: Vec::with_capacity(horizon),
        t_lim,
        faulted_steps: 0,
    };
    for t in 0..horizon {
        let features = env.features(&state, t_lim);
        let dist = act_dist(policy, &features)?;
        let raw = sample_raw(&dist, rng);
        let applied = clamp(&raw, t_lim);
        match env.step(&state, &applied) {
            Ok((next, base_reward)) => {
                let u = env.safety_value(&next);
                traj.steps.push(Step {
                    features,
                    raw,
                    applied,
                    shaped_reward: penalized_reward(base_reward, u, spec),
                    base_reward,
                    safety_value: u,
                    violation: is_violation(u, spec),
                });
                state = next;
            }
            Err(_) => {
                traj.faulted_steps = horizon - t;
                break;
            }
        }
    }
    Ok(traj)
}

/// Collects `n_episodes` episodes under a common torque limit.
#[allow(clippy::too_many_arguments)]
pub fn collect<E: Environment, R: Rng + ?Sized>(
    env: &E,
    policy: &PolicyParams,
    spec: &SafetySpec,
    t_lim: f64,
    n_episodes: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<RolloutBatch> {
    if n_episodes == 0 {
        return Err(Error::Empty("episode count"));
    }
    let trajectories = (0..n_episodes)
        .map(|_| collect_episode(env, policy, spec, t_lim, horizon, rng))
        .collect::<Result<Vec<_>>>()?;
    RolloutBatch::new(trajectories, t_lim)
}
