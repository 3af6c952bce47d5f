mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use safelimit_core::gauss::*;

fn g(mu: f64, sigma: f64) -> GaussParams {
    GaussParams::new(mu, sigma).unwrap()
}

#[test]
fn cdf_matches_quadrature_to_1e12() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..200 {
        let mu = rng.random_range(-3.0..3.0);
        let sigma = rng.random_range(0.05..4.0);
        let z: f64 = rng.random_range(-8.0..8.0);
        let x = mu + z * sigma;
        let got = normal_cdf(x, &g(mu, sigma));
        let want = cdf_by_quadrature(x, mu, sigma);
        assert!((got - want).abs() <= 1e-12, "x={x} mu={mu} sigma={sigma}: {got} vs {want}");
    }
}

#[test]
fn cdf_known_quantile() {
    let want = cdf_by_quadrature(1.959964, 0.0, 1.0);
    assert!((want - 0.975).abs() < 1e-6);
    assert!((normal_cdf(1.959964, &GaussParams::standard()) - want).abs() < 1e-12);
}

#[test]
fn tail_mass_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let mu = rng.random_range(-2.0..2.0);
        let sigma = rng.random_range(0.1..2.0);
        let t_lim = rng.random_range(0.05..4.0);
        let upper = upper_tail_by_quadrature(t_lim, mu, sigma);
        // P(X <= -t) = P(-X >= t) with -X ~ N(-mu, sigma)
        let lower = upper_tail_by_quadrature(t_lim, -mu, sigma);
        let want = upper + lower;
        let got = tail_mass(&g(mu, sigma), t_lim);
        assert!((got - want).abs() <= 1e-6, "mu={mu} sigma={sigma} t={t_lim}: {got} vs {want}");
    }
}

#[test]
fn truncated_distribution_normalizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let mu = rng.random_range(-3.0..3.0);
        let sigma = rng.random_range(0.1..3.0);
        let t_lim = rng.random_range(0.05..4.0);
        let d = TruncatedGauss::new(g(mu, sigma), t_lim).unwrap();
        let inner = simpson(|t| trunc_prob(&d, t).density, -t_lim * (1.0 - 1e-15), t_lim * (1.0 - 1e-15), 20_000);
        let lower = trunc_prob(&d, -t_lim).point_mass;
        let upper = trunc_prob(&d, t_lim).point_mass;
        let total = inner + lower + upper;
        assert!((total - 1.0).abs() < 1e-8, "total {total}");
    }
}

#[test]
fn kl_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let (m1, m2) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let (s1, s2) = (rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
        let got = gauss_kl(&g(m1, s1), &g(m2, s2));
        let want = kl_by_quadrature(m1, s1, m2, s2);
        assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
    }
    assert!((kl_by_quadrature(0.0, 1.0, 1.0, 1.0) - 0.5).abs() < 1e-9);
    assert!((kl_by_quadrature(0.0, 1.0, 0.0, 2.0) - 0.318147).abs() < 1e-6);
}

#[test]
fn kl_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cases = [(0.0, 1.0, 1.0, 1.0), (0.0, 1.0, 0.0, 2.0), (0.3, 0.5, -0.2, 0.8)];
    for (m1, s1, m2, s2) in cases {
        let n = 1_000_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let x = m1 + s1 * z;
            let lr = (-0.5 * z * z - f64::ln(s1)) - (-0.5 * ((x - m2) / s2).powi(2) - f64::ln(s2));
            sum += lr;
            sum2 += lr * lr;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = gauss_kl(&g(m1, s1), &g(m2, s2));
        assert!((mean - exact).abs() <= 3.0 * se, "mc {mean} ± {se} vs {exact}");
    }
}

#[test]
fn intersection_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let sigma = rng.random_range(0.05..3.0);
        let delta = rng.random_range(0.0..0.5);
        let shift = mean_shift_from_kl(sigma, delta);
        let want = overlap_by_quadrature(sigma, shift);
        let got = intersection_area(sigma, delta);
        assert!((got - want).abs() <= 1e-6, "sigma={sigma} delta={delta}: {got} vs {want}");
    }
    assert!((overlap_by_quadrature(1.0, 0.4) - 0.841481).abs() < 1e-6);
}

proptest! {
    #[test]
    fn tail_mass_monotone(mu in -3.0f64..3.0, sigma in 0.01f64..3.0, a in 0.001f64..5.0, b in 0.001f64..5.0) {
        let p = g(mu, sigma);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(tail_mass(&p, lo) >= tail_mass(&p, hi));
        let m = tail_mass(&p, a);
        prop_assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn kl_nonnegative(m1 in -5.0f64..5.0, s1 in 0.01f64..5.0, m2 in -5.0f64..5.0, s2 in 0.01f64..5.0) {
        prop_assert!(gauss_kl(&g(m1, s1), &g(m2, s2)) >= 0.0);
        prop_assert_eq!(gauss_kl(&g(m1, s1), &g(m1, s1)), 0.0);
    }

    #[test]
    fn kl_shift_round_trip(mu in -5.0f64..5.0, sigma in 0.01f64..5.0, delta in 0.0f64..2.0) {
        let shifted = g(mu + mean_shift_from_kl(sigma, delta), sigma);
        prop_assert!((gauss_kl(&g(mu, sigma), &shifted) - delta).abs() < 1e-10);
    }

    #[test]
    fn intersection_in_unit_interval(sigma in 0.01f64..5.0, delta in 0.0f64..5.0) {
        let a = intersection_area(sigma, delta);
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!((a - 2.0 * standard_normal_cdf(-(delta / 2.0).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn cdf_monotone(mu in -3.0f64..3.0, sigma in 0.01f64..3.0, a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let p = g(mu, sigma);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(normal_cdf(lo, &p) <= normal_cdf(hi, &p));
    }
}
