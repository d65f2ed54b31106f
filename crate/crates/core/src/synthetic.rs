//! Seeded synthetic series for smoke tests and benchmarks.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::timeseries::PriceSeries;

/// Geometric Brownian motion sampled daily:
/// `S[t+1] = S[t]·exp((μ − σ²/2) + σ·Z)`.
pub fn gbm(n: usize, s0: f64, drift: f64, vol: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = s0;
    let mut out = Vec::with_capacity(n);
    out.push(s);
    for _ in 1..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        s *= (drift - 0.5 * vol * vol + vol * z).exp();
        out.push(s);
    }
    out
}

/// [`gbm`] as a dated series starting 2015-01-01.
pub fn gbm_series(n: usize, seed: u64) -> PriceSeries {
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date");
    PriceSeries::from_values(
        format!("gbm-{seed}"),
        start,
        gbm(n, 100.0, 2e-4, 0.015, seed),
    )
    .expect("gbm prices are positive")
}

/// AR(1) `x[t] = φ·x[t−1] + σ·Z` from `x[0] = 0`.
pub fn ar1(n: usize, phi: f64, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x = phi * x + sigma * z;
            x
        })
        .collect()
}
