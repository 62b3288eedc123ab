//! Separable 2D Gaussian fits to clouds of IQ samples.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::{PI, SQRT_2};

use super::lm::{least_squares, Bounds, LmOptions};
use super::FitError;

pub const MIN_SAMPLES: usize = 16;

/// Fitted blob `Z = A·exp(−(I−I₀)²/2σ_I² − (Q−Q₀)²/2σ_Q²)`, with A in counts per
/// histogram bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobFit {
    pub a: f64,
    pub i0: f64,
    pub q0: f64,
    pub sigma_i: f64,
    pub sigma_q: f64,
    pub residual_norm: f64,
}

impl BlobFit {
    pub fn center(&self) -> Complex64 {
        Complex64::new(self.i0, self.q0)
    }

    /// Mean of σ_I and σ_Q.
    pub fn sigma(&self) -> f64 {
        0.5 * (self.sigma_i + self.sigma_q)
    }
}

struct Moments {
    mean: (f64, f64),
    std: (f64, f64),
    lo: (f64, f64),
    hi: (f64, f64),
}

fn moments(samples: &[Complex64]) -> Result<Moments, FitError> {
    if samples.len() < MIN_SAMPLES {
        return Err(FitError::TooFewPoints {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Complex64>() / n;
    let (mut vi, mut vq) = (0.0, 0.0);
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for s in samples {
        vi += (s.re - mean.re).powi(2);
        vq += (s.im - mean.im).powi(2);
        lo = (lo.0.min(s.re), lo.1.min(s.im));
        hi = (hi.0.max(s.re), hi.1.max(s.im));
    }
    let std = ((vi / (n - 1.0)).sqrt(), (vq / (n - 1.0)).sqrt());
    let scale = mean.re.abs().max(mean.im.abs()).max(f64::MIN_POSITIVE);
    let degenerate = |s: f64, range: f64| !(s > 1e-12 * scale) || !(range > 0.0) || !s.is_finite();
    if degenerate(std.0, hi.0 - lo.0) || degenerate(std.1, hi.1 - lo.1) {
        return Err(FitError::DegenerateCloud);
    }
    Ok(Moments {
        mean: (mean.re, mean.im),
        std,
        lo,
        hi,
    })
}

/// Blob from sample mean and standard deviation; A is the matching peak count for a
/// ⌈√n⌉² histogram of the bounding box.
pub fn blob_from_moments(samples: &[Complex64]) -> Result<BlobFit, FitError> {
    let m = moments(samples)?;
    let bins = (samples.len() as f64).sqrt().ceil();
    let (di, dq) = ((m.hi.0 - m.lo.0) / bins, (m.hi.1 - m.lo.1) / bins);
    Ok(BlobFit {
        a: samples.len() as f64 * di * dq / (2.0 * PI * m.std.0 * m.std.1),
        i0: m.mean.0,
        q0: m.mean.1,
        sigma_i: m.std.0,
        sigma_q: m.std.1,
        residual_norm: f64::NAN,
    })
}

/// Per-bin integral of exp(−(x−x₀)²/2σ²) divided by the bin width.
fn bin_profile(edges: &[f64], x0: f64, sigma: f64, out: &mut [f64]) {
    let s = SQRT_2 * sigma;
    let width = edges[1] - edges[0];
    let k = (PI / 2.0).sqrt() * sigma / width;
    let mut prev = erf((edges[0] - x0) / s);
    for (o, e) in out.iter_mut().zip(&edges[1..]) {
        let next = erf((e - x0) / s);
        *o = k * (next - prev);
        prev = next;
    }
}

/// Least-squares fit of a bin-integrated separable Gaussian to the ⌈√n⌉×⌈√n⌉
/// histogram of the samples over their bounding box. Centres are constrained to the
/// box.
pub fn fit_blob(samples: &[Complex64]) -> Result<BlobFit, FitError> {
    let m = moments(samples)?;
    let nb = (samples.len() as f64).sqrt().ceil() as usize;
    let edges = |lo: f64, hi: f64| -> Vec<f64> {
        (0..=nb).map(|k| lo + (hi - lo) * k as f64 / nb as f64).collect()
    };
    let (ei, eq) = (edges(m.lo.0, m.hi.0), edges(m.lo.1, m.hi.1));
    let (di, dq) = ((m.hi.0 - m.lo.0) / nb as f64, (m.hi.1 - m.lo.1) / nb as f64);
    let mut counts = vec![0.0; nb * nb];
    for s in samples {
        let bi = (((s.re - m.lo.0) / di) as usize).min(nb - 1);
        let bq = (((s.im - m.lo.1) / dq) as usize).min(nb - 1);
        counts[bi * nb + bq] += 1.0;
    }

    // parameters in units of the moments for conditioning
    let a0 = samples.len() as f64 * di * dq / (2.0 * PI * m.std.0 * m.std.1);
    let unscale = |p: &[f64]| {
        [
            p[0] * a0,
            m.mean.0 + p[1] * m.std.0,
            m.mean.1 + p[2] * m.std.1,
            p[3] * m.std.0,
            p[4] * m.std.1,
        ]
    };
    let residuals = |p: &[f64]| {
        let [a, i0, q0, si, sq] = unscale(p);
        let (mut gi, mut gq) = (vec![0.0; nb], vec![0.0; nb]);
        bin_profile(&ei, i0, si, &mut gi);
        bin_profile(&eq, q0, sq, &mut gq);
        let mut r = Vec::with_capacity(nb * nb);
        for (x, gx) in gi.iter().enumerate() {
            for (y, gy) in gq.iter().enumerate() {
                r.push(a * gx * gy - counts[x * nb + y]);
            }
        }
        r
    };
    let bounds = Bounds::new(
        vec![1e-6, (m.lo.0 - m.mean.0) / m.std.0, (m.lo.1 - m.mean.1) / m.std.1, 1e-6, 1e-6],
        vec![
            f64::INFINITY,
            (m.hi.0 - m.mean.0) / m.std.0,
            (m.hi.1 - m.mean.1) / m.std.1,
            1e6,
            1e6,
        ],
    );
    let names: Vec<String> = ["a", "i0", "q0", "sigma_i", "sigma_q"].map(String::from).to_vec();
    let opts = LmOptions {
        step_tol: 1e-10,
        grad_tol: 1e-12,
        max_iterations: 500,
    };
    let report = match least_squares(residuals, &names, &[1.0, 0.0, 0.0, 1.0, 1.0], &bounds, &opts) {
        Ok(r) => r,
        Err(FitError::NotConverged(r)) => *r,
        Err(e) => return Err(e),
    };
    let [a, i0, q0, sigma_i, sigma_q] = unscale(&report.parameters);
    Ok(BlobFit {
        a,
        i0,
        q0,
        sigma_i,
        sigma_q,
        residual_norm: report.residual_norm,
    })
}
