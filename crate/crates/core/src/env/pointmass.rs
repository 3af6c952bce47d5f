//! One-dimensional damped point mass on a bounded track, pushed toward a
//! fixed target. Hitting an end stop zeroes the velocity.
//!
//! Used for learner smoke tests: the optimal controller is linear in
//! `(x, v)` and therefore representable by the linear policy.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, Fault};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointMass {
    pub mass: f64,
    pub damping: f64,
    pub dt: f64,
    pub target: f64,
    /// End stops at `±track_limit`.
    pub track_limit: f64,
    pub init_range: f64,
}

impl Default for PointMass {
    fn default() -> Self {
        Self {
            mass: 1.0,
            damping: 2.0,
            dt: 0.05,
            target: 1.0,
            track_limit: 2.0,
            init_range: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PointMassState {
    pub x: f64,
    pub v: f64,
    pub t: usize,
}

impl Environment for PointMass {
    type State = PointMassState;

    fn action_dim(&self) -> usize {
        1
    }

    fn feature_dim(&self) -> usize {
        4
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> PointMassState {
        let x = if self.init_range > 0.0 {
            rng.random_range(-self.init_range..=self.init_range)
        } else {
            0.0
        };
        PointMassState { x, v: 0.0, t: 0 }
    }

    fn step(&self, s: &PointMassState, applied: &[f64]) -> Result<(PointMassState, f64), Fault> {
        let acc = (applied[0] - self.damping * s.v) / self.mass;
        let mut v = s.v + self.dt * acc;
        let mut x = s.x + self.dt * v;
        if !(x.is_finite() && v.is_finite()) {
            return Err(Fault);
        }
        if x.abs() > self.track_limit {
            x = x.clamp(-self.track_limit, self.track_limit);
            v = 0.0;
        }
        let err = x - self.target;
        Ok((PointMassState { x, v, t: s.t + 1 }, -err * err))
    }

    fn features(&self, s: &PointMassState, t_lim: f64) -> Vec<f64> {
        alloc::vec![s.x, s.v, t_lim, 1.0]
    }

    /// Speed; fast motion is the unsafe event.
    fn safety_value(&self, s: &PointMassState) -> f64 {
        libm::fabs(s.v)
    }
}
