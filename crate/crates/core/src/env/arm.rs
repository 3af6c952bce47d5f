//! Two-link planar arm hanging under gravity.
//!
//! Joint angles are measured from straight down; the second angle is
//! relative to the first link. Links are uniform rods, integrated with
//! semi-implicit Euler at a fixed step (velocity first, then position, with
//! joint damping treated implicitly).

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, Fault};
use crate::error::{Error, Result};
use crate::policy;

/// Hard rail on joint speeds, rad/s.
pub const MAX_JOINT_SPEED: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub link_masses: [f64; 2],
    pub link_lengths: [f64; 2],
    pub damping: [f64; 2],
    pub inertia_scale: f64,
    pub gravity: f64,
    pub dt: f64,
}

impl ArmModel {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("link_masses", self.link_masses[0]),
            ("link_masses", self.link_masses[1]),
            ("link_lengths", self.link_lengths[0]),
            ("link_lengths", self.link_lengths[1]),
            ("damping", self.damping[0]),
            ("damping", self.damping[1]),
            ("inertia_scale", self.inertia_scale),
            ("gravity", self.gravity),
            ("dt", self.dt),
        ];
        for (name, value) in scalars {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Lighter copy: masses, damping and link inertia divided by factors
    /// that must each be at least 1. `dt` and geometry are kept.
    pub fn reduced(&self, mass_factor: f64, damping_factor: f64, inertia_factor: f64) -> Result<ArmModel> {
        for (name, value) in [
            ("mass_factor", mass_factor),
            ("damping_factor", damping_factor),
            ("inertia_factor", inertia_factor),
        ] {
            if !(value >= 1.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(ArmModel {
            link_masses: self.link_masses.map(|m| m / mass_factor),
            damping: self.damping.map(|d| d / damping_factor),
            inertia_scale: self.inertia_scale / inertia_factor,
            ..*self
        })
    }

    /// Rotational inertia of link `i` about its centre of mass.
    fn link_inertia(&self, i: usize) -> f64 {
        let l = self.link_lengths[i];
        self.inertia_scale * self.link_masses[i] * l * l / 12.0
    }

    /// Kinetic plus potential energy, potential measured from the shoulder height.
    pub fn energy(&self, state: &EnvState) -> f64 {
        let [m1, m2] = self.link_masses;
        let [l1, l2] = self.link_lengths;
        let (lc1, lc2) = (l1 / 2.0, l2 / 2.0);
        let [q1, q2] = state.angles;
        let [v1, v2] = state.velocities;
        let (i1, i2) = (self.link_inertia(0), self.link_inertia(1));
        let c2 = libm::cos(q2);
        let m11 = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2);
        let m12 = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
        let m22 = i2 + m2 * lc2 * lc2;
        let kinetic = 0.5 * (m11 * v1 * v1 + 2.0 * m12 * v1 * v2 + m22 * v2 * v2);
        let y1 = -lc1 * libm::cos(q1);
        let y2 = -l1 * libm::cos(q1) - lc2 * libm::cos(q1 + q2);
        kinetic + self.gravity * (m1 * y1 + m2 * y2)
    }

    /// End-effector position relative to the shoulder (y up).
    pub fn end_effector(&self, state: &EnvState) -> [f64; 2] {
        let [l1, l2] = self.link_lengths;
        let [q1, q2] = state.angles;
        [
            l1 * libm::sin(q1) + l2 * libm::sin(q1 + q2),
            -l1 * libm::cos(q1) - l2 * libm::cos(q1 + q2),
        ]
    }

    /// Velocity after one step: damping is taken implicitly, everything else
    /// explicitly, i.e. `(M + dt·D) v' = M v + dt (τ - c(q, v) - g(q))`.
    fn next_velocities(&self, state: &EnvState, torque: &[f64]) -> [f64; 2] {
        let [m1, m2] = self.link_masses;
        let [l1, l2] = self.link_lengths;
        let (lc1, lc2) = (l1 / 2.0, l2 / 2.0);
        let [q1, q2] = state.angles;
        let [v1, v2] = state.velocities;
        let (i1, i2) = (self.link_inertia(0), self.link_inertia(1));
        let (g, dt) = (self.gravity, self.dt);

        let (s2, c2) = (libm::sin(q2), libm::cos(q2));
        let m11 = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2);
        let m12 = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
        let m22 = i2 + m2 * lc2 * lc2;

        let h = m2 * l1 * lc2 * s2;
        let coriolis = [-h * (2.0 * v1 * v2 + v2 * v2), h * v1 * v1];
        let s12 = libm::sin(q1 + q2);
        let grav = [
            (m1 * lc1 + m2 * l1) * g * libm::sin(q1) + m2 * lc2 * g * s12,
            m2 * lc2 * g * s12,
        ];
        let rhs = [
            m11 * v1 + m12 * v2 + dt * (torque[0] - coriolis[0] - grav[0]),
            m12 * v1 + m22 * v2 + dt * (torque[1] - coriolis[1] - grav[1]),
        ];
        let a11 = m11 + dt * self.damping[0];
        let a22 = m22 + dt * self.damping[1];
        let det = a11 * a22 - m12 * m12;
        [
            (a22 * rhs[0] - m12 * rhs[1]) / det,
            (a11 * rhs[1] - m12 * rhs[0]) / det,
        ]
    }
}

/// Nominal model used for pre-training.
pub fn make_train_model() -> ArmModel {
    ArmModel {
        link_masses: [1.0, 1.0],
        link_lengths: [0.5, 0.5],
        damping: [0.5, 0.5],
        inertia_scale: 1.0,
        gravity: 9.81,
        dt: 0.05,
    }
}

/// Train model with masses, damping and inertia divided by the given factors.
pub fn make_test_model(mass_factor: f64, damping_factor: f64, inertia_factor: f64) -> Result<ArmModel> {
    make_train_model().reduced(mass_factor, damping_factor, inertia_factor)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvState {
    pub angles: [f64; 2],
    pub velocities: [f64; 2],
    pub t: usize,
}

impl EnvState {
    fn is_finite(&self) -> bool {
        self.angles.iter().chain(&self.velocities).all(|x| x.is_finite())
    }
}

/// Reference the end-effector tracks: one revolution per episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleReference {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Default for CircleReference {
    fn default() -> Self {
        Self {
            center: [0.0, -0.85],
            radius: 0.15,
        }
    }
}

impl CircleReference {
    pub fn point(&self, t: usize, horizon: usize) -> [f64; 2] {
        let phase = TAU * t as f64 / horizon as f64;
        [
            self.center[0] + self.radius * libm::cos(phase),
            self.center[1] + self.radius * libm::sin(phase),
        ]
    }
}

/// One semi-implicit Euler step; returns the next state and the tracking reward.
pub fn step(
    model: &ArmModel,
    state: &EnvState,
    applied: &[f64],
    reference: &CircleReference,
    horizon: usize,
) -> Result<(EnvState, f64), Fault> {
    let v_next = model.next_velocities(state, applied);
    let mut next = EnvState {
        t: state.t + 1,
        ..*state
    };
    for i in 0..2 {
        next.velocities[i] = v_next[i].clamp(-MAX_JOINT_SPEED, MAX_JOINT_SPEED);
        next.angles[i] = state.angles[i] + model.dt * next.velocities[i];
    }
    if !next.is_finite() {
        return Err(Fault);
    }
    let ee = model.end_effector(&next);
    let target = reference.point(next.t, horizon);
    let (dx, dy) = (ee[0] - target[0], ee[1] - target[1]);
    Ok((next, -(dx * dx + dy * dy)))
}

/// Tilt of the distal link from straight down, in `[0, π]`.
pub fn safety_value(state: &EnvState) -> f64 {
    let tilt = state.angles[0] + state.angles[1];
    let mut wrapped = libm::fmod(tilt, TAU);
    if wrapped > PI {
        wrapped -= TAU;
    } else if wrapped < -PI {
        wrapped += TAU;
    }
    libm::fabs(wrapped).min(PI)
}

/// Uniform joint angles in `[-angle_range, angle_range]`, at rest.
pub fn reset<R: Rng + ?Sized>(rng: &mut R, angle_range: f64) -> EnvState {
    debug_assert!(angle_range >= 0.0);
    let mut draw = || {
        if angle_range > 0.0 {
            rng.random_range(-angle_range..=angle_range)
        } else {
            0.0
        }
    };
    let q1 = draw();
    let q2 = draw();
    EnvState {
        angles: [q1, q2],
        velocities: [0.0; 2],
        t: 0,
    }
}

/// Arm plant bound to a reference circle and episode length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmEnv {
    pub model: ArmModel,
    pub reference: CircleReference,
    pub horizon: usize,
    pub angle_range: f64,
}

impl ArmEnv {
    pub fn new(model: ArmModel, horizon: usize, angle_range: f64) -> Self {
        Self {
            model,
            reference: CircleReference::default(),
            horizon,
            angle_range,
        }
    }
}

impl Environment for ArmEnv {
    type State = EnvState;

    fn action_dim(&self) -> usize {
        2
    }

    fn feature_dim(&self) -> usize {
        policy::ARM_FEATURE_DIM
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        reset(rng, self.angle_range)
    }

    fn step(&self, state: &EnvState, applied: &[f64]) -> Result<(EnvState, f64), Fault> {
        step(&self.model, state, applied, &self.reference, self.horizon)
    }

    fn features(&self, state: &EnvState, t_lim: f64) -> Vec<f64> {
        policy::features(state, t_lim)
    }

    fn safety_value(&self, state: &EnvState) -> f64 {
        safety_value(state)
    }
}
