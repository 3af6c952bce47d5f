use alloc::vec::Vec;

use super::gae::{discounted_returns, GaeConfig};
use super::rollout::RolloutBatch;
use crate::linalg::cholesky_solve;

/// State-value estimate used to form TD residuals.
pub trait ValueFunction {
    fn value(&self, features: &[f64], t: usize) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroBaseline;

impl ValueFunction for ZeroBaseline {
    fn value(&self, _: &[f64], _: usize) -> f64 {
        0.0
    }
}

pub(crate) const RIDGE: f64 = 1e-5;

/// Least-squares fit of return-to-go on `[features, t/100, (t/100)², 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearBaseline {
    coeffs: Vec<f64>,
}

fn regressors(features: &[f64], t: usize) -> impl Iterator<Item = f64> + '_ {
    let s = t as f64 / 100.0;
    features.iter().copied().chain([s, s * s, 1.0])
}

impl LinearBaseline {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn predict(&self, features: &[f64], t: usize) -> f64 {
        if self.coeffs.is_empty() {
            return 0.0;
        }
        regressors(features, t).zip(&self.coeffs).map(|(x, c)| x * c).sum()
    }
}

impl ValueFunction for LinearBaseline {
    fn value(&self, features: &[f64], t: usize) -> f64 {
        self.predict(features, t)
    }
}

pub fn fit_linear_baseline(batch: &RolloutBatch, cfg: &GaeConfig) -> LinearBaseline {
    let Some(first) = batch.steps().next() else {
        return LinearBaseline::default();
    };
    let n = first.features.len() + 3;
    let mut xtx = alloc::vec![0.0; n * n];
    let mut xty = alloc::vec![0.0; n];
    let mut row = Vec::with_capacity(n);
    for traj in batch.trajectories() {
        let returns = discounted_returns(traj, cfg.gamma);
        for (t, (step, y)) in traj.steps.iter().zip(returns).enumerate() {
            row.clear();
            row.extend(regressors(&step.features, t));
            for i in 0..n {
                xty[i] += row[i] * y;
                for j in 0..n {
                    xtx[i * n + j] += row[i] * row[j];
                }
            }
        }
    }
    // Escalate the ridge if the normal equations are numerically singular.
    let mut reg = RIDGE;
    for _ in 0..5 {
        let mut a = xtx.clone();
        for i in 0..n {
            a[i * n + i] += reg;
        }
        if let Some(coeffs) = cholesky_solve(&a, &xty, n) {
            if coeffs.iter().all(|c| c.is_finite()) {
                return LinearBaseline { coeffs };
            }
        }
        reg *= 10.0;
    }
    LinearBaseline::default()
}
