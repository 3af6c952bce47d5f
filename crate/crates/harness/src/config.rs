//! Experiment configuration: one JSON document, every field defaulted.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use safelimit_core::env::{make_train_model, ArmModel, PointMass, SafetySpec};
use safelimit_core::learner::GaeConfig;
use safelimit_core::{SafetyConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    #[default]
    Arm,
    Pointmass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    /// Multipliers applied to the nominal arm to get the pre-training model.
    pub train_mass_scale: f64,
    pub train_damping_scale: f64,
    /// Train-to-test divisors for link masses, damping and inertia.
    pub mass_factor: f64,
    pub damping_factor: f64,
    pub inertia_factor: f64,
    pub u_lim: f64,
    pub u_prime_lim: f64,
    pub lambda_penalty: f64,
    pub horizon: usize,
    pub angle_range: f64,
    /// Plant used when `kind` is `pointmass`, for both phases.
    pub point_mass: PointMass,
}

impl Default for EnvConfig {
    fn default() -> Self {
        let spec = SafetySpec::default();
        Self {
            kind: EnvKind::Arm,
            train_mass_scale: 5.0,
            train_damping_scale: 10.0,
            mass_factor: 10.0,
            damping_factor: 10.0,
            inertia_factor: 10.0,
            u_lim: spec.u_lim,
            u_prime_lim: spec.u_prime_lim,
            lambda_penalty: spec.lambda_penalty,
            horizon: 200,
            angle_range: 0.3,
            point_mass: PointMass::default(),
        }
    }
}

impl EnvConfig {
    pub fn train_model(&self) -> ArmModel {
        let nominal = make_train_model();
        ArmModel {
            link_masses: nominal.link_masses.map(|m| m * self.train_mass_scale),
            damping: nominal.damping.map(|d| d * self.train_damping_scale),
            ..nominal
        }
    }

    pub fn test_model(&self) -> Result<ArmModel> {
        Ok(self
            .train_model()
            .reduced(self.mass_factor, self.damping_factor, self.inertia_factor)?)
    }

    pub fn safety_spec(&self) -> SafetySpec {
        SafetySpec {
            u_lim: self.u_lim,
            u_prime_lim: self.u_prime_lim,
            lambda_penalty: self.lambda_penalty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub lambda_gae: f64,
    pub delta_kl_pretrain: f64,
    pub delta_kl_finetune: f64,
    pub episodes_per_batch_pretrain: usize,
    pub episodes_per_batch_finetune: usize,
    pub pretrain_iterations: usize,
    pub finetune_iterations: usize,
    pub init_std: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            lambda_gae: 0.98,
            delta_kl_pretrain: 0.01,
            delta_kl_finetune: 0.05,
            episodes_per_batch_pretrain: 50,
            episodes_per_batch_finetune: 5,
            pretrain_iterations: 30,
            finetune_iterations: 100,
            init_std: 0.45,
        }
    }
}

impl LearnerConfig {
    pub fn gae(&self) -> GaeConfig {
        GaeConfig {
            gamma: self.gamma,
            lambda_gae: self.lambda_gae,
        }
    }
}

/// Named job layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Full controller against a constant limit at `t_max`.
    AdaptiveVsFixed,
    /// Full controller and the three reduced predictors.
    Ablation,
    /// Full controller at each budget in `d_safe_sweep`.
    DsafeSweep,
    /// Full controller on the point-mass plant.
    Pointmass,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::AdaptiveVsFixed,
        Preset::Ablation,
        Preset::DsafeSweep,
        Preset::Pointmass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::AdaptiveVsFixed => "adaptive_vs_fixed",
            Preset::Ablation => "ablation",
            Preset::DsafeSweep => "dsafe_sweep",
            Preset::Pointmass => "pointmass",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.as_str()).collect();
                format!("unknown preset `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub learner: LearnerConfig,
    pub safety: SafetyConfig,
    pub seeds: Vec<u64>,
    pub preset: Option<Preset>,
    /// Budgets visited by the `dsafe_sweep` preset.
    pub d_safe_sweep: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            learner: LearnerConfig::default(),
            safety: SafetyConfig::default(),
            seeds: vec![0, 1, 2, 3, 4],
            preset: None,
            d_safe_sweep: vec![0.25, 0.5, 1.0, 2.0],
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            HarnessError::config(field, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let env = &self.env;
        for (field, value) in [
            ("env.train_mass_scale", env.train_mass_scale),
            ("env.train_damping_scale", env.train_damping_scale),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(HarnessError::config(field, format!("must be positive, got {value}")));
            }
        }
        for (field, value) in [
            ("env.mass_factor", env.mass_factor),
            ("env.damping_factor", env.damping_factor),
            ("env.inertia_factor", env.inertia_factor),
        ] {
            if !(value >= 1.0 && value.is_finite()) {
                return Err(HarnessError::config(field, format!("must be a finite number >= 1, got {value}")));
            }
        }
        if !(env.u_lim > 0.0 && env.u_lim.is_finite()) {
            return Err(HarnessError::config("env.u_lim", format!("must be positive, got {}", env.u_lim)));
        }
        if !(env.u_prime_lim >= 0.0 && env.u_prime_lim <= env.u_lim) {
            return Err(HarnessError::config(
                "env.u_prime_lim",
                format!("must lie in [0, u_lim], got {}", env.u_prime_lim),
            ));
        }
        if !(env.lambda_penalty >= 0.0 && env.lambda_penalty.is_finite()) {
            return Err(HarnessError::config("env.lambda_penalty", "must be finite and >= 0"));
        }
        if env.horizon == 0 {
            return Err(HarnessError::config("env.horizon", "must be at least 1"));
        }
        if !(env.angle_range >= 0.0 && env.angle_range.is_finite()) {
            return Err(HarnessError::config("env.angle_range", "must be finite and >= 0"));
        }
        let pm = &env.point_mass;
        for (field, value) in [
            ("env.point_mass.mass", pm.mass),
            ("env.point_mass.dt", pm.dt),
            ("env.point_mass.track_limit", pm.track_limit),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(HarnessError::config(field, format!("must be positive, got {value}")));
            }
        }
        if !(pm.damping >= 0.0 && pm.damping.is_finite()) {
            return Err(HarnessError::config("env.point_mass.damping", "must be finite and >= 0"));
        }
        if !(pm.target.abs() <= pm.track_limit) {
            return Err(HarnessError::config("env.point_mass.target", "must lie on the track"));
        }
        if !(pm.init_range >= 0.0 && pm.init_range <= pm.track_limit) {
            return Err(HarnessError::config("env.point_mass.init_range", "must lie in [0, track_limit]"));
        }

        let l = &self.learner;
        for (field, value) in [("learner.gamma", l.gamma), ("learner.lambda_gae", l.lambda_gae)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(HarnessError::config(field, format!("must lie in [0, 1], got {value}")));
            }
        }
        for (field, value) in [
            ("learner.delta_kl_pretrain", l.delta_kl_pretrain),
            ("learner.delta_kl_finetune", l.delta_kl_finetune),
            ("learner.init_std", l.init_std),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(HarnessError::config(field, format!("must be positive, got {value}")));
            }
        }
        if l.episodes_per_batch_pretrain == 0 && l.pretrain_iterations > 0 {
            return Err(HarnessError::config("learner.episodes_per_batch_pretrain", "must be at least 1"));
        }
        if l.episodes_per_batch_finetune == 0 {
            return Err(HarnessError::config("learner.episodes_per_batch_finetune", "must be at least 1"));
        }

        self.safety
            .validate()
            .map_err(|e| HarnessError::config("safety", e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds", "at least one seed is required"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::config("seeds", "seeds must be distinct"));
        }
        for (i, d) in self.d_safe_sweep.iter().enumerate() {
            let probe = SafetyConfig {
                d_safe: *d,
                ..self.safety
            };
            if probe.validate().is_err() {
                return Err(HarnessError::config(
                    format!("d_safe_sweep[{i}]"),
                    format!("budget {d} must be finite and exceed safety.t_min"),
                ));
            }
        }
        if self.preset == Some(Preset::DsafeSweep) && self.d_safe_sweep.is_empty() {
            return Err(HarnessError::config("d_safe_sweep", "the dsafe_sweep preset needs at least one budget"));
        }
        Ok(())
    }

    pub fn env_kind(&self) -> EnvKind {
        match self.preset {
            Some(Preset::Pointmass) => EnvKind::Pointmass,
            _ => self.env.kind,
        }
    }

    /// Safety settings of every job the configuration expands to.
    pub fn jobs(&self) -> Vec<SafetyConfig> {
        let with = |variant: Variant, d_safe: f64| SafetyConfig {
            variant,
            d_safe,
            ..self.safety
        };
        let d = self.safety.d_safe;
        match self.preset {
            None => vec![self.safety],
            Some(Preset::AdaptiveVsFixed) => vec![with(Variant::Full, d), with(Variant::FixedLimit, d)],
            Some(Preset::Ablation) => [
                Variant::Full,
                Variant::V2NoDpu1,
                Variant::V3NoDpu2,
                Variant::V4Neither,
            ]
            .into_iter()
            .map(|v| with(v, d))
            .collect(),
            Some(Preset::DsafeSweep) => self.d_safe_sweep.iter().map(|&x| with(Variant::Full, x)).collect(),
            Some(Preset::Pointmass) => vec![with(Variant::Full, d)],
        }
    }
}
