//! Linear-in-features diagonal Gaussian policy over joint torques.
//!
//! The mean is `weights · features + bias`; the standard deviation is
//! `exp(log_std)` and does not depend on the state. Log-probabilities are
//! always evaluated on the raw (pre-clamp) action, since that is what was
//! sampled.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::arm::EnvState;
use crate::error::{ensure_dim, Error, Result};
use crate::gauss::{gauss_kl, GaussParams};

/// Lower bound on the policy standard deviation enforced after updates.
pub const STD_FLOOR: f64 = 1e-4;

/// Length of the arm feature vector produced by [`features`].
pub const ARM_FEATURE_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub action_dim: usize,
    pub feature_dim: usize,
}

/// Policy parameters. Serializes as
/// `{"weights": [row-major], "bias": [...], "log_std": [...], "dims": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct PolicyParams {
    weights: Vec<f64>,
    bias: Vec<f64>,
    log_std: Vec<f64>,
    dims: Dims,
}

#[derive(Deserialize)]
struct RawParams {
    weights: Vec<f64>,
    bias: Vec<f64>,
    log_std: Vec<f64>,
    dims: Dims,
}

impl TryFrom<RawParams> for PolicyParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        PolicyParams::from_parts(raw.dims, raw.weights, raw.bias, raw.log_std)
    }
}

impl PolicyParams {
    /// Zero weights and bias with every standard deviation set to `init_std`.
    pub fn new(action_dim: usize, feature_dim: usize, init_std: f64) -> Result<Self> {
        if !(init_std > 0.0 && init_std.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "init_std",
                value: init_std,
            });
        }
        Self::from_parts(
            Dims {
                action_dim,
                feature_dim,
            },
            alloc::vec![0.0; action_dim * feature_dim],
            alloc::vec![0.0; action_dim],
            alloc::vec![libm::log(init_std); action_dim],
        )
    }

    pub fn from_parts(
        dims: Dims,
        weights: Vec<f64>,
        bias: Vec<f64>,
        log_std: Vec<f64>,
    ) -> Result<Self> {
        if dims.action_dim == 0 || dims.feature_dim == 0 {
            return Err(Error::Config("policy dimensions must be positive"));
        }
        ensure_dim("weights", dims.action_dim * dims.feature_dim, weights.len())?;
        ensure_dim("bias", dims.action_dim, bias.len())?;
        ensure_dim("log_std", dims.action_dim, log_std.len())?;
        for (name, v) in [("weights", &weights), ("bias", &bias), ("log_std", &log_std)] {
            if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter { name, value: *bad });
            }
        }
        Ok(Self {
            weights,
            bias,
            log_std,
            dims,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn action_dim(&self) -> usize {
        self.dims.action_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.dims.feature_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| libm::exp(*l)).collect()
    }

    pub fn num_params(&self) -> usize {
        self.dims.action_dim * (self.dims.feature_dim + 1) + self.dims.action_dim
    }

    /// Flattened as `[weights (row-major), bias, log_std]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.bias);
        out.extend_from_slice(&self.log_std);
        out
    }

    /// Inverse of [`PolicyParams::flatten`] for the same dimensions.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        ensure_dim("flat parameters", self.num_params(), flat.len())?;
        let nw = self.weights.len();
        let a = self.dims.action_dim;
        Self::from_parts(
            self.dims,
            flat[..nw].to_vec(),
            flat[nw..nw + a].to_vec(),
            flat[nw + a..].to_vec(),
        )
    }

    /// Raises every `log_std` entry to at least `ln(STD_FLOOR)`.
    pub fn with_std_floor(mut self) -> Self {
        let floor = libm::log(STD_FLOOR);
        for l in &mut self.log_std {
            if *l < floor {
                *l = floor;
            }
        }
        self
    }

    fn mean(&self, features: &[f64]) -> Vec<f64> {
        let f = self.dims.feature_dim;
        self.weights
            .chunks_exact(f)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// Per-joint Gaussian produced by the policy at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDist {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ActionDist {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn joint(&self, i: usize) -> GaussParams {
        GaussParams::new(self.mean[i], self.std[i]).expect("policy produced invalid Gaussian")
    }
}

/// Arm features: `[sin q1, cos q1, sin q2, cos q2, v1, v2, t_lim, 1]`.
pub fn features(state: &EnvState, t_lim: f64) -> Vec<f64> {
    let [q1, q2] = state.angles;
    let [v1, v2] = state.velocities;
    alloc::vec![
        libm::sin(q1),
        libm::cos(q1),
        libm::sin(q2),
        libm::cos(q2),
        v1,
        v2,
        t_lim,
        1.0
    ]
}

pub fn act_dist(params: &PolicyParams, features: &[f64]) -> Result<ActionDist> {
    ensure_dim("features", params.feature_dim(), features.len())?;
    Ok(ActionDist {
        mean: params.mean(features),
        std: params.std(),
    })
}

pub fn sample_raw<R: Rng + ?Sized>(dist: &ActionDist, rng: &mut R) -> Vec<f64> {
    dist.mean
        .iter()
        .zip(&dist.std)
        .map(|(m, s)| {
            let z: f64 = rng.sample(StandardNormal);
            m + s * z
        })
        .collect()
}

/// Clamps every component to `[-t_lim, t_lim]`.
pub fn clamp(raw: &[f64], t_lim: f64) -> Vec<f64> {
    debug_assert!(t_lim > 0.0);
    raw.iter().map(|t| t.clamp(-t_lim, t_lim)).collect()
}

pub fn log_prob(dist: &ActionDist, raw: &[f64]) -> f64 {
    let half_log_2pi = 0.5 * libm::log(2.0 * PI);
    dist.mean
        .iter()
        .zip(&dist.std)
        .zip(raw)
        .map(|((m, s), a)| {
            let z = (a - m) / s;
            -0.5 * z * z - libm::log(*s) - half_log_2pi
        })
        .sum()
}

/// Score function `∇θ log π(raw | features)` in [`PolicyParams::flatten`] order.
pub fn grad_log_prob(params: &PolicyParams, features: &[f64], raw: &[f64]) -> Result<Vec<f64>> {
    let mut out = alloc::vec![0.0; params.num_params()];
    accumulate_grad_log_prob(params, features, raw, 1.0, &mut out)?;
    Ok(out)
}

/// Adds `scale · ∇θ log π(raw | features)` into `out`.
pub(crate) fn accumulate_grad_log_prob(
    params: &PolicyParams,
    features: &[f64],
    raw: &[f64],
    scale: f64,
    out: &mut [f64],
) -> Result<()> {
    let dist = act_dist(params, features)?;
    let a = params.action_dim();
    let f = params.feature_dim();
    ensure_dim("action", a, raw.len())?;
    ensure_dim("gradient buffer", params.num_params(), out.len())?;
    let nw = a * f;
    for i in 0..a {
        let s = dist.std[i];
        let diff = raw[i] - dist.mean[i];
        let d_mean = scale * diff / (s * s);
        for (g, x) in out[i * f..(i + 1) * f].iter_mut().zip(features) {
            *g += d_mean * x;
        }
        out[nw + i] += d_mean;
        out[nw + a + i] += scale * (diff * diff / (s * s) - 1.0);
    }
    Ok(())
}

/// Average over states of the summed per-joint `KL(old || new)`.
pub fn mean_kl<F: AsRef<[f64]>>(
    old: &PolicyParams,
    new: &PolicyParams,
    states_features: &[F],
) -> Result<f64> {
    if states_features.is_empty() {
        return Err(Error::Empty("state list"));
    }
    ensure_dim("action", old.action_dim(), new.action_dim())?;
    let mut total = 0.0;
    for f in states_features {
        let p = act_dist(old, f.as_ref())?;
        let q = act_dist(new, f.as_ref())?;
        total += (0..p.dim())
            .map(|i| gauss_kl(&p.joint(i), &q.joint(i)))
            .sum::<f64>();
    }
    Ok(total / states_features.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rest() -> EnvState {
        EnvState::default()
    }

    #[test]
    fn feature_layout() {
        let a = features(&rest(), 0.1);
        assert_eq!(a.len(), ARM_FEATURE_DIM);
        assert_eq!(&a[6..], &[0.1, 1.0]);
        assert_eq!(a[0], 0.0);
        assert_eq!(a[1], 1.0);
        assert_eq!(a[2], 0.0);
        assert_eq!(a[3], 1.0);
        let b = features(&rest(), 3.0);
        for i in 0..ARM_FEATURE_DIM {
            if i != 6 {
                assert_eq!(a[i], b[i]);
            }
        }
    }

    #[test]
    fn act_dist_linear() {
        let p = PolicyParams::new(2, 3, 1.0).unwrap();
        let d = act_dist(&p, &[0.4, -1.0, 2.0]).unwrap();
        assert_eq!(d.mean, [0.0, 0.0]);
        assert_eq!(d.std, [1.0, 1.0]);

        let dims = Dims {
            action_dim: 2,
            feature_dim: 3,
        };
        let w = alloc::vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let p = PolicyParams::from_parts(dims, w, alloc::vec![0.0; 2], alloc::vec![0.0; 2]).unwrap();
        let d = act_dist(&p, &[0.0, 7.0, -2.0]).unwrap();
        assert_eq!(d.mean, [7.0, -2.0]);
        assert!(act_dist(&p, &[1.0]).is_err());
    }

    #[test]
    fn flatten_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = PolicyParams::new(2, 4, 0.5).unwrap();
        let flat: Vec<f64> = (0..p.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q = p.with_flat(&flat).unwrap();
        assert_eq!(q.flatten(), flat);
        assert_eq!(p.num_params(), 2 * 5 + 2);
        assert!(p.with_flat(&flat[1..]).is_err());
    }

    #[test]
    fn sample_degenerate_and_deterministic() {
        let d = ActionDist {
            mean: alloc::vec![0.3, -1.2],
            std: alloc::vec![1e-12, 1e-12],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_raw(&d, &mut rng);
        assert_abs_diff_eq!(s[0], 0.3, epsilon = 1e-9);
        assert_abs_diff_eq!(s[1], -1.2, epsilon = 1e-9);

        let d = ActionDist {
            mean: alloc::vec![0.0; 3],
            std: alloc::vec![1.0; 3],
        };
        let a = sample_raw(&d, &mut ChaCha8Rng::seed_from_u64(11));
        let b = sample_raw(&d, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(&[5.0, -5.0], 3.0), [3.0, -3.0]);
        assert_eq!(clamp(&[0.05], 0.1), [0.05]);
    }

    #[test]
    fn log_prob_examples() {
        let d = ActionDist {
            mean: alloc::vec![0.0],
            std: alloc::vec![1.0],
        };
        assert_abs_diff_eq!(log_prob(&d, &[0.0]), -0.918938533204673, epsilon = 1e-12);

        let d = ActionDist {
            mean: alloc::vec![0.5, -2.0, 1.0],
            std: alloc::vec![0.3, 2.0, 1.5],
        };
        let expected = -(libm::log(0.3) + libm::log(2.0) + libm::log(1.5)) - 1.5 * libm::log(2.0 * PI);
        assert_abs_diff_eq!(log_prob(&d, &d.mean.clone()), expected, epsilon = 1e-12);

        let shifted = ActionDist {
            mean: d.mean.iter().map(|m| m + 4.0).collect(),
            std: d.std.clone(),
        };
        let a = [0.1, 0.2, 0.3];
        let a_shift: Vec<f64> = a.iter().map(|x| x + 4.0).collect();
        assert_abs_diff_eq!(log_prob(&d, &a), log_prob(&shifted, &a_shift), epsilon = 1e-12);
    }

    #[test]
    fn score_at_mean_has_zero_mean_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PolicyParams::new(2, 3, 0.7).unwrap();
        let flat: Vec<f64> = (0..p.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = p.with_flat(&flat).unwrap();
        let f = [0.2, -0.4, 1.0];
        let mean = act_dist(&p, &f).unwrap().mean;
        let g = grad_log_prob(&p, &f, &mean).unwrap();
        assert!(g[..2 * 3 + 2].iter().all(|x| *x == 0.0));
        assert!(g[2 * 3 + 2..].iter().all(|x| *x == -1.0));
    }

    #[test]
    fn mean_kl_examples() {
        let p = PolicyParams::new(1, 1, 1.0).unwrap();
        let states = [[1.0], [1.0], [1.0]];
        assert_eq!(mean_kl(&p, &p, &states).unwrap(), 0.0);

        let dims = p.dims();
        let q = PolicyParams::from_parts(dims, alloc::vec![0.2], alloc::vec![0.0], alloc::vec![0.0]).unwrap();
        assert_abs_diff_eq!(mean_kl(&p, &q, &states).unwrap(), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(mean_kl(&p, &q, &states[..1]).unwrap(), 0.02, epsilon = 1e-15);
        let empty: [[f64; 1]; 0] = [];
        assert!(mean_kl(&p, &q, &empty).is_err());
    }

    #[test]
    fn std_floor_applies() {
        let p = PolicyParams::new(1, 1, 1e-9).unwrap().with_std_floor();
        assert_abs_diff_eq!(p.std()[0], STD_FLOOR, epsilon = 1e-18);
    }
}
