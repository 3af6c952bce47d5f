//! Scalar Gaussian machinery used by the safety controller.
//!
//! The normal CDF is computed through `libm::erfc`, a port of the FreeBSD
//! `s_erf.c` routine (sub-ulp relative error over the whole real line). The
//! complementary form is used for upper tails so small tail masses keep full
//! relative precision.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and standard deviation of a scalar Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussParams {
    mu: f64,
    sigma: f64,
}

impl GaussParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParameter { name: "mu", value: mu });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: sigma,
            });
        }
        Ok(Self { mu, sigma })
    }

    pub fn standard() -> Self {
        Self { mu: 0.0, sigma: 1.0 }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        libm::exp(-0.5 * z * z) / (self.sigma * libm::sqrt(2.0 * PI))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        standard_normal_cdf((x - self.mu) / self.sigma)
    }

    /// `1 - cdf(x)`, without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        standard_normal_cdf((self.mu - x) / self.sigma)
    }
}

/// Standard normal CDF, `Φ(z) = erfc(-z/√2) / 2`.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// CDF of `p` evaluated at `x`.
pub fn normal_cdf(x: f64, p: &GaussParams) -> f64 {
    p.cdf(x)
}

/// A Gaussian whose samples are clipped to `[-t_lim, t_lim]`.
///
/// The result is a mixed distribution: a density on the open interval plus
/// a point mass at each bound collecting the clipped tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGauss {
    base: GaussParams,
    t_lim: f64,
}

impl TruncatedGauss {
    pub fn new(base: GaussParams, t_lim: f64) -> Result<Self> {
        if !(t_lim > 0.0 && t_lim.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_lim",
                value: t_lim,
            });
        }
        Ok(Self { base, t_lim })
    }

    pub fn base(&self) -> &GaussParams {
        &self.base
    }

    pub fn t_lim(&self) -> f64 {
        self.t_lim
    }

    /// Mass collected at `-t_lim`.
    pub fn lower_mass(&self) -> f64 {
        self.base.cdf(-self.t_lim)
    }

    /// Mass collected at `+t_lim`.
    pub fn upper_mass(&self) -> f64 {
        self.base.sf(self.t_lim)
    }
}

/// Density and point mass of a truncated Gaussian at a single torque value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncProb {
    pub density: f64,
    pub point_mass: f64,
}

pub fn trunc_prob(d: &TruncatedGauss, t: f64) -> TruncProb {
    let lim = d.t_lim;
    if t == -lim {
        TruncProb {
            density: 0.0,
            point_mass: d.lower_mass(),
        }
    } else if t == lim {
        TruncProb {
            density: 0.0,
            point_mass: d.upper_mass(),
        }
    } else if t > -lim && t < lim {
        TruncProb {
            density: d.base.pdf(t),
            point_mass: 0.0,
        }
    } else {
        TruncProb {
            density: 0.0,
            point_mass: 0.0,
        }
    }
}

/// Probability that a raw sample falls at or beyond `±t_lim`.
pub fn tail_mass(p: &GaussParams, t_lim: f64) -> f64 {
    let m = p.sf(t_lim) + p.cdf(-t_lim);
    m.clamp(0.0, 1.0)
}

/// `KL(p1 || p2)` in nats.
pub fn gauss_kl(p1: &GaussParams, p2: &GaussParams) -> f64 {
    let dm = p1.mu - p2.mu;
    let kl = libm::log(p2.sigma / p1.sigma)
        + (p1.sigma * p1.sigma + dm * dm) / (2.0 * p2.sigma * p2.sigma)
        - 0.5;
    kl.max(0.0)
}

/// Mean displacement of two equal-variance Gaussians whose KL equals `delta_kl`.
pub fn mean_shift_from_kl(sigma: f64, delta_kl: f64) -> f64 {
    debug_assert!(sigma > 0.0 && delta_kl >= 0.0);
    sigma * libm::sqrt(2.0 * delta_kl)
}

/// Overlap area of two equal-variance Gaussians separated by
/// [`mean_shift_from_kl`]. Translation invariant, so no mean is taken.
pub fn intersection_area(sigma: f64, delta_kl: f64) -> f64 {
    debug_assert!(sigma > 0.0 && delta_kl >= 0.0);
    // The two densities cross halfway between the means; the overlap is twice
    // the mass of one Gaussian beyond the crossing point.
    let half_gap = sigma * libm::sqrt(delta_kl / 2.0);
    let centred = GaussParams { mu: 0.0, sigma };
    (2.0 * centred.cdf(-half_gap)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g(mu: f64, sigma: f64) -> GaussParams {
        GaussParams::new(mu, sigma).unwrap()
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(GaussParams::new(0.0, 0.0).is_err());
        assert!(GaussParams::new(0.0, -1.0).is_err());
        assert!(GaussParams::new(f64::NAN, 1.0).is_err());
        assert!(TruncatedGauss::new(g(0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(normal_cdf(0.0, &g(0.0, 1.0)), 0.5);
        assert_abs_diff_eq!(normal_cdf(1.959964, &g(0.0, 1.0)), 0.975, epsilon = 1e-6);
        assert_eq!(normal_cdf(2.0, &g(2.0, 5.0)), 0.5);
    }

    #[test]
    fn trunc_prob_cases() {
        let d = TruncatedGauss::new(g(0.0, 1.0), 1.0).unwrap();
        assert_eq!(
            trunc_prob(&d, 2.0),
            TruncProb {
                density: 0.0,
                point_mass: 0.0
            }
        );
        let at_zero = trunc_prob(&d, 0.0);
        assert_abs_diff_eq!(at_zero.density, 0.398942, epsilon = 1e-6);
        assert_eq!(at_zero.point_mass, 0.0);

        let d = TruncatedGauss::new(g(0.0, 1.0), 1.959964).unwrap();
        let top = trunc_prob(&d, 1.959964);
        assert_eq!(top.density, 0.0);
        assert_abs_diff_eq!(top.point_mass, 0.025, epsilon = 1e-6);
        let bottom = trunc_prob(&d, -1.959964);
        assert_abs_diff_eq!(bottom.point_mass, 0.025, epsilon = 1e-6);
    }

    #[test]
    fn tail_mass_examples() {
        assert_abs_diff_eq!(tail_mass(&g(0.0, 1.0), 1.959964), 0.05, epsilon = 1e-6);
        assert!(tail_mass(&g(0.0, 1.0), 100.0) < 1e-12);
        assert!(tail_mass(&g(5.0, 0.1), 1.0) > 1.0 - 1e-12);
        assert!(tail_mass(&g(0.3, 1.0), 1e-9) > 1.0 - 1e-8);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(gauss_kl(&g(0.7, 1.3), &g(0.7, 1.3)), 0.0);
        assert_abs_diff_eq!(gauss_kl(&g(0.0, 1.0), &g(1.0, 1.0)), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            gauss_kl(&g(0.0, 1.0), &g(0.0, 2.0)),
            libm::log(2.0) - 0.375,
            epsilon = 1e-15
        );
    }

    #[test]
    fn mean_shift_examples() {
        assert_eq!(mean_shift_from_kl(1.0, 0.0), 0.0);
        assert_abs_diff_eq!(mean_shift_from_kl(1.0, 0.02), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(mean_shift_from_kl(2.0, 0.08), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn intersection_examples() {
        assert_eq!(intersection_area(0.3, 0.0), 1.0);
        assert_abs_diff_eq!(intersection_area(1.0, 0.08), 0.841481, epsilon = 1e-6);
        assert_abs_diff_eq!(
            intersection_area(3.0, 0.08),
            intersection_area(1.0, 0.08),
            epsilon = 1e-15
        );
        // closed form in standard units
        let d = 0.37;
        assert_abs_diff_eq!(
            intersection_area(2.5, d),
            2.0 * standard_normal_cdf(-libm::sqrt(d / 2.0)),
            epsilon = 1e-15
        );
    }
}
