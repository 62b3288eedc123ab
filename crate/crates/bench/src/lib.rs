//! Shared fixtures for the kernel benchmarks.

use num_complex::Complex64;
use kiset_core::rng::rng_for;
use rand_distr::{Distribution, Normal};

/// Isotropic Gaussian cloud of `n` IQ samples around `mu`.
pub fn gaussian_cloud(seed: u64, n: usize, mu: Complex64, sigma: f64) -> Vec<Complex64> {
    let mut rng = rng_for(seed, 0);
    let d = Normal::new(0.0, sigma).expect("positive sigma");
    (0..n)
        .map(|_| mu + Complex64::new(d.sample(&mut rng), d.sample(&mut rng)))
        .collect()
}

/// `n` evenly spaced values from `a` to `b`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}
