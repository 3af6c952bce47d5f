//! Simulated plants and the task-safety bookkeeping shared by all of them.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod arm;
pub mod pointmass;

pub use arm::{make_test_model, make_train_model, ArmEnv, ArmModel, EnvState};
pub use pointmass::{PointMass, PointMassState};

/// Integration produced a non-finite state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault;

/// A fixed-step plant driven by already-clamped joint torques.
pub trait Environment {
    type State: Clone;

    fn action_dim(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    /// Advances one step and returns the next state with its base reward.
    fn step(&self, state: &Self::State, applied: &[f64]) -> Result<(Self::State, f64), Fault>;
    fn features(&self, state: &Self::State, t_lim: f64) -> Vec<f64>;
    /// Safety function `u(s)`; a step is unsafe when it exceeds `u_lim`.
    fn safety_value(&self, state: &Self::State) -> f64;
}

/// Violation threshold and penalty shaping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetySpec {
    pub u_lim: f64,
    pub u_prime_lim: f64,
    pub lambda_penalty: f64,
}

impl Default for SafetySpec {
    fn default() -> Self {
        Self {
            u_lim: 0.2,
            u_prime_lim: 0.0,
            lambda_penalty: 0.001,
        }
    }
}

impl SafetySpec {
    pub fn new(u_lim: f64, u_prime_lim: f64, lambda_penalty: f64) -> Result<Self> {
        let spec = Self {
            u_lim,
            u_prime_lim,
            lambda_penalty,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_prime_lim >= 0.0 && self.u_prime_lim <= self.u_lim && self.u_lim.is_finite()) {
            return Err(Error::Config("SafetySpec requires 0 <= u_prime_lim <= u_lim"));
        }
        if !(self.lambda_penalty >= 0.0 && self.lambda_penalty.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda_penalty",
                value: self.lambda_penalty,
            });
        }
        Ok(())
    }
}

pub fn is_violation(u: f64, spec: &SafetySpec) -> bool {
    u > spec.u_lim
}

/// `r - λ · max(0, u - u'_lim)²`.
pub fn penalized_reward(r: f64, u: f64, spec: &SafetySpec) -> f64 {
    let excess = (u - spec.u_prime_lim).max(0.0);
    r - spec.lambda_penalty * excess * excess
}
