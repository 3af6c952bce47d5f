//! Torque-limit controller that keeps predicted expected damage within budget.
//!
//! Each iteration the empirical unsafety rate of the last batch is inflated by
//! two worst-case increments: the probability mass the (updated) policy puts
//! at or beyond the current limit, which a changed limit could turn into new
//! torques, and the non-overlap of old and new policy Gaussians allowed by
//! the KL trust region. The next limit is the largest one whose damage at
//! that predicted rate still meets the budget, subject to a growth cap and
//! the `[t_min, t_max]` range.
//!
//! Actions with several joints are combined with a union bound (per-state
//! sum over joints, capped at one), and the KL budget is split evenly across
//! joints when bounding the policy change.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{intersection_area, tail_mass};
use crate::learner::RolloutBatch;
use crate::policy::{act_dist, PolicyParams};

/// Which worst-case increments enter the predicted unsafety rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Both increments.
    Full,
    /// Ignores the torque-limit increment.
    V2NoDpu1,
    /// Ignores the policy-update increment.
    V3NoDpu2,
    /// Uses the empirical rate alone.
    V4Neither,
    /// Baseline: the limit never moves.
    FixedLimit,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::V2NoDpu1,
        Variant::V3NoDpu2,
        Variant::V4Neither,
        Variant::FixedLimit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::V2NoDpu1 => "v2_no_dpu1",
            Variant::V3NoDpu2 => "v3_no_dpu2",
            Variant::V4Neither => "v4_neither",
            Variant::FixedLimit => "fixed_limit",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or(Error::Config("unknown variant"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyConfig {
    pub d_safe: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub growth_cap: f64,
    pub pu_floor: f64,
    pub variant: Variant,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            d_safe: 0.5,
            t_min: 0.1,
            t_max: 3.0,
            growth_cap: 1.05,
            pu_floor: 1e-3,
            variant: Variant::Full,
        }
    }
}

impl SafetyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return Err(Error::Config("requires 0 < t_min < t_max"));
        }
        if !(self.t_min < self.d_safe && self.d_safe.is_finite()) {
            return Err(Error::Config("requires t_min < d_safe"));
        }
        if !(self.growth_cap > 1.0 && self.growth_cap.is_finite()) {
            return Err(Error::Config("requires growth_cap > 1"));
        }
        if !(self.pu_floor > 0.0 && self.pu_floor <= 1.0) {
            return Err(Error::Config("requires 0 < pu_floor <= 1"));
        }
        Ok(())
    }

    /// Limit the first iteration runs at.
    pub fn initial_limit(&self) -> f64 {
        match self.variant {
            Variant::FixedLimit => self.t_max,
            _ => self.t_min,
        }
    }
}

/// Worst damage an unsafe step can do at a given torque limit.
pub trait DamageModel {
    fn max_damage(&self, t_lim: f64) -> f64;
    /// Largest limit whose worst damage does not exceed `damage`.
    fn limit_for_damage(&self, damage: f64) -> f64;
}

/// `d_max = alpha · T_lim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDamage {
    pub alpha: f64,
}

impl Default for LinearDamage {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

impl DamageModel for LinearDamage {
    fn max_damage(&self, t_lim: f64) -> f64 {
        self.alpha * t_lim
    }

    fn limit_for_damage(&self, damage: f64) -> f64 {
        damage / self.alpha
    }
}

/// One iteration's safety ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub p_u: f64,
    pub delta_pu1: f64,
    pub delta_pu2: f64,
    pub p_u_pred: f64,
    pub t_lim_next: f64,
    /// Empirical expected damage of the batch, `p_u · d_max(t_lim)`.
    pub expected_damage: f64,
}

impl SafetyReport {
    /// Damage predicted for the next iteration under the linear model,
    /// `p_u_pred · t_lim_next`.
    pub fn predicted_damage(&self) -> f64 {
        self.p_u_pred * self.t_lim_next
    }
}

/// Fraction of violating timesteps in the batch.
pub fn empirical_unsafety(batch: &RolloutBatch) -> f64 {
    let (bad, total) = batch
        .trajectories()
        .iter()
        .fold((0usize, 0usize), |(b, n), t| (b + t.violations(), n + t.timesteps()));
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}

/// Mean over visited states of the mass the policy puts at or beyond `±t_lim`.
pub fn delta_pu1(batch: &RolloutBatch, policy: &PolicyParams, t_lim: f64) -> Result<f64> {
    if !(t_lim > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_lim",
            value: t_lim,
        });
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for step in batch.steps() {
        let dist = act_dist(policy, &step.features)?;
        let per_state: f64 = (0..dist.dim()).map(|i| tail_mass(&dist.joint(i), t_lim)).sum();
        total += per_state.min(1.0);
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { (total / n as f64).clamp(0.0, 1.0) })
}

/// One minus the mean overlap between consecutive policies allowed by
/// `delta_kl`, given each visited state's per-joint standard deviations.
pub fn delta_pu2<S: AsRef<[f64]>>(sigma_by_state: &[S], delta_kl: f64) -> f64 {
    if sigma_by_state.is_empty() || delta_kl <= 0.0 {
        return 0.0;
    }
    let total: f64 = sigma_by_state
        .iter()
        .map(|sigmas| {
            let sigmas = sigmas.as_ref();
            let share = delta_kl / sigmas.len().max(1) as f64;
            sigmas
                .iter()
                .map(|s| 1.0 - intersection_area(*s, share))
                .sum::<f64>()
                .min(1.0)
        })
        .sum();
    (total / sigma_by_state.len() as f64).clamp(0.0, 1.0)
}

/// Predicted next unsafety rate for `variant`, clamped to `[pu_floor, 1]`.
pub fn predict_unsafety(p_u: f64, dpu1: f64, dpu2: f64, variant: Variant, pu_floor: f64) -> f64 {
    let raw = match variant {
        Variant::Full | Variant::FixedLimit => p_u + dpu1 + dpu2,
        Variant::V2NoDpu1 => p_u + dpu2,
        Variant::V3NoDpu2 => p_u + dpu1,
        Variant::V4Neither => p_u,
    };
    raw.clamp(pu_floor, 1.0)
}

pub fn update_torque_limit(p_u_pred: f64, t_lim_current: f64, cfg: &SafetyConfig) -> f64 {
    update_torque_limit_with(&LinearDamage::default(), p_u_pred, t_lim_current, cfg)
}

/// Largest limit meeting the budget at `p_u_pred`; increases are capped at
/// `growth_cap`, decreases apply at once.
pub fn update_torque_limit_with<D: DamageModel + ?Sized>(
    damage: &D,
    p_u_pred: f64,
    t_lim_current: f64,
    cfg: &SafetyConfig,
) -> f64 {
    if cfg.variant == Variant::FixedLimit {
        return t_lim_current;
    }
    let raw = damage.limit_for_damage(cfg.d_safe / p_u_pred);
    raw.min(cfg.growth_cap * t_lim_current).clamp(cfg.t_min, cfg.t_max)
}

pub fn expected_damage(p_u: f64, t_lim: f64) -> f64 {
    p_u * LinearDamage::default().max_damage(t_lim)
}

/// Safety half of one fine-tuning iteration. `policy` is the already
/// updated policy; `batch` was collected at `t_lim` with its predecessor.
pub fn run_iteration(
    policy: &PolicyParams,
    batch: &RolloutBatch,
    t_lim: f64,
    cfg: &SafetyConfig,
    delta_kl: f64,
) -> Result<SafetyReport> {
    run_iteration_with(&LinearDamage::default(), policy, batch, t_lim, cfg, delta_kl)
}

pub fn run_iteration_with<D: DamageModel + ?Sized>(
    damage: &D,
    policy: &PolicyParams,
    batch: &RolloutBatch,
    t_lim: f64,
    cfg: &SafetyConfig,
    delta_kl: f64,
) -> Result<SafetyReport> {
    cfg.validate()?;
    let p_u = empirical_unsafety(batch);
    let dpu1 = delta_pu1(batch, policy, t_lim)?;
    let sigmas: Vec<Vec<f64>> = batch
        .steps()
        .map(|s| act_dist(policy, &s.features).map(|d| d.std))
        .collect::<Result<_>>()?;
    let dpu2 = delta_pu2(&sigmas, delta_kl);
    let p_u_pred = predict_unsafety(p_u, dpu1, dpu2, cfg.variant, cfg.pu_floor);
    let t_lim_next = update_torque_limit_with(damage, p_u_pred, t_lim, cfg);
    Ok(SafetyReport {
        p_u,
        delta_pu1: dpu1,
        delta_pu2: dpu2,
        p_u_pred,
        t_lim_next,
        expected_damage: p_u * damage.max_damage(t_lim),
    })
}
