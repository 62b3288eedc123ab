//! Straight-line regressions in log-log space: t_min extrapolation and power-law
//! regimes.

use serde::{Deserialize, Serialize};

use super::{FitError, SnrPoint};

/// Ordinary least-squares line y = intercept + slope·x with its covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub var_slope: f64,
    pub var_intercept: f64,
    pub cov: f64,
    pub n: usize,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit, FitError> {
    let n = x.len().min(y.len());
    if n < 2 {
        return Err(FitError::TooFewPoints { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) || sxx <= 1e-24 * mx.abs().max(1.0).powi(2) * nf {
        return Err(FitError::IllConditioned);
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let s2 = if n > 2 {
        x[..n]
            .iter()
            .zip(&y[..n])
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum::<f64>()
            / (nf - 2.0)
    } else {
        f64::NAN
    };
    Ok(LineFit {
        slope,
        intercept,
        var_slope: s2 / sxx,
        var_intercept: s2 * (1.0 / nf + mx * mx / sxx),
        cov: -s2 * mx / sxx,
        n,
    })
}

/// Result of extrapolating SNR(t_int) to SNR = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TminFit {
    pub t_min_s: f64,
    /// d log10 SNR / d log10 t_int.
    pub slope: f64,
    pub intercept: f64,
    /// One-sigma uncertainty of t_min from the regression covariance.
    pub stderr_s: f64,
    /// Shortest fitted t_int divided by t_min; above 1 means t_min lies below the data.
    pub extrapolation_ratio: f64,
}

/// Log-log OLS of SNR against t_int, solved for SNR = 1. Points with non-positive
/// SNR are ignored.
pub fn tmin_extrapolate(points: &[SnrPoint]) -> Result<TminFit, FitError> {
    let used: Vec<&SnrPoint> = points
        .iter()
        .filter(|p| p.snr > 0.0 && p.snr.is_finite() && p.t_int_s > 0.0)
        .collect();
    if used.len() < 3 {
        return Err(FitError::TooFewPoints {
            needed: 3,
            got: used.len(),
        });
    }
    let x: Vec<f64> = used.iter().map(|p| p.t_int_s.log10()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.snr.log10()).collect();
    let line = ols(&x, &y)?;
    let (a, b) = (line.slope, line.intercept);
    let u = -b / a;
    let t_min = 10f64.powf(u);
    let (du_da, du_db) = (b / (a * a), -1.0 / a);
    let var_u = du_da * du_da * line.var_slope + du_db * du_db * line.var_intercept
        + 2.0 * du_da * du_db * line.cov;
    let t_lo = used.iter().map(|p| p.t_int_s).fold(f64::INFINITY, f64::min);
    Ok(TminFit {
        t_min_s: t_min,
        slope: a,
        intercept: b,
        stderr_s: std::f64::consts::LN_10 * t_min * var_u.max(0.0).sqrt(),
        extrapolation_ratio: t_lo / t_min,
    })
}

/// Independent log-log fits of t_min(P) below and at-or-above `split_w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub low: Option<LineFit>,
    pub high: Option<LineFit>,
}

impl PowerLawFit {
    pub fn exp_low(&self) -> f64 {
        self.low.map_or(f64::NAN, |l| l.slope)
    }

    pub fn exp_high(&self) -> f64 {
        self.high.map_or(f64::NAN, |l| l.slope)
    }
}

/// Each side needs two points with positive P and t_min; a side without them is `None`.
pub fn fit_power_law(points: &[(f64, f64)], split_w: f64) -> PowerLawFit {
    let side = |keep: &dyn Fn(f64) -> bool| {
        let (x, y): (Vec<f64>, Vec<f64>) = points
            .iter()
            .filter(|(p, t)| *p > 0.0 && *t > 0.0 && t.is_finite() && keep(*p))
            .map(|(p, t)| (p.log10(), t.log10()))
            .unzip();
        ols(&x, &y).ok()
    };
    PowerLawFit {
        low: side(&|p| p < split_w),
        high: side(&|p| p >= split_w),
    }
}
