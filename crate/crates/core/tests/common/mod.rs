#![allow(dead_code)]
//! Independent numerical oracles shared by the integration tests.

use std::f64::consts::PI;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

/// `Φ` by quadrature of the density from the mean outwards.
pub fn cdf_by_quadrature(x: f64, mu: f64, sigma: f64) -> f64 {
    if x == mu {
        return 0.5;
    }
    let panels = (((x - mu).abs() / sigma) * 2000.0).ceil() as usize * 2 + 2;
    let half = simpson(|t| normal_pdf(t, mu, sigma), mu, x, panels);
    0.5 + half
}

/// Upper tail `P(X >= x)` for `x >= mu + 1σ` by quadrature out to 40σ.
pub fn upper_tail_by_quadrature(x: f64, mu: f64, sigma: f64) -> f64 {
    if x <= mu {
        return 1.0 - cdf_by_quadrature(x, mu, sigma);
    }
    simpson(|t| normal_pdf(t, mu, sigma), x, mu + 40.0 * sigma, 200_000)
}

/// Overlap `∫ min(N(0,σ²), N(d,σ²))`, split at the crossing point.
pub fn overlap_by_quadrature(sigma: f64, shift: f64) -> f64 {
    let mid = shift / 2.0;
    let lo = -12.0 * sigma;
    let hi = shift + 12.0 * sigma;
    let left = simpson(|x| normal_pdf(x, shift, sigma), lo, mid, 200_000);
    let right = simpson(|x| normal_pdf(x, 0.0, sigma), mid, hi, 200_000);
    left + right
}

/// `∫ p1 log(p1/p2)` over `μ1 ± 14σ1`.
pub fn kl_by_quadrature(mu1: f64, s1: f64, mu2: f64, s2: f64) -> f64 {
    simpson(
        |x| {
            let p = normal_pdf(x, mu1, s1);
            if p == 0.0 {
                return 0.0;
            }
            let lp = -0.5 * ((x - mu1) / s1).powi(2) - s1.ln();
            let lq = -0.5 * ((x - mu2) / s2).powi(2) - s2.ln();
            p * (lp - lq)
        },
        mu1 - 14.0 * s1,
        mu1 + 14.0 * s1,
        200_000,
    )
}

/// Central finite-difference gradient.
pub fn central_diff<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let up = f(&xp);
            xp[i] = orig - h;
            let down = f(&xp);
            xp[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Max elementwise relative error with an absolute floor for tiny entries.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
