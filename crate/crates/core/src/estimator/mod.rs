//! Fitting and statistics: least squares, IQ blob fits, SNR and t_min extraction.

mod blob;
mod lm;
mod models;
mod regression;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blob::{blob_from_moments, fit_blob, BlobFit, MIN_SAMPLES};
pub use lm::{
    central_jacobian, forward_jacobian, least_squares, Bounds, FitReport, LmOptions, FD_STEP,
    GRAD_TOL, MAX_ITERATIONS, STEP_TOL,
};
pub use models::{BuiltinModel, Residual, ALL_MODELS};
pub use regression::{fit_power_law, ols, tmin_extrapolate, LineFit, PowerLawFit, TminFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid fit input: {0}")]
    InvalidInput(String),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("residual is not finite at the initial guess")]
    NonFiniteResidual,
    #[error("no convergence after {} steps", .0.n_iterations)]
    NotConverged(Box<FitReport>),
    #[error("normal equations are singular")]
    SingularNormalEquations,
    #[error("sample cloud has zero spread on one axis")]
    DegenerateCloud,
    #[error("regression abscissae are all equal")]
    IllConditioned,
}

/// SNR at one integration time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub t_int_s: f64,
    pub snr: f64,
}

/// `|c_on − c_off|² / (0.25·(σ_on + σ_off)²)`, each σ the mean of the blob's two widths.
pub fn snr(on: &BlobFit, off: &BlobFit) -> f64 {
    let d2 = (on.center() - off.center()).norm_sqr();
    d2 / (0.25 * (on.sigma() + off.sigma()).powi(2))
}

/// Fits a built-in model to (x, y) data.
pub fn fit_curve(
    model: BuiltinModel,
    x: &[f64],
    y: &[f64],
    initial_guess: &[f64],
    bounds: Option<&Bounds>,
) -> Result<FitReport, FitError> {
    if x.len() != y.len() {
        return Err(FitError::InvalidInput(format!(
            "x has {} values, y has {}",
            x.len(),
            y.len()
        )));
    }
    let names: Vec<String> = model.parameter_names().iter().map(|s| s.to_string()).collect();
    if initial_guess.len() != names.len() {
        return Err(FitError::InvalidInput(format!(
            "{} expects {} parameters, got {}",
            model,
            names.len(),
            initial_guess.len()
        )));
    }
    let default = {
        let (lo, hi) = model.default_bounds();
        Bounds::new(lo, hi)
    };
    let residuals = |p: &[f64]| x.iter().zip(y).map(|(&xi, &yi)| model.residual(xi, yi, p)).collect();
    least_squares(
        residuals,
        &names,
        initial_guess,
        bounds.unwrap_or(&default),
        &LmOptions::default(),
    )
}

/// Largest column-relative disagreement between the forward and central Jacobians
/// of a model's residuals at `p`.
pub fn jacobian_disagreement(model: BuiltinModel, x: &[f64], y: &[f64], p: &[f64]) -> f64 {
    let f = |q: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(&a, &b)| model.residual(a, b, q)).collect() };
    let r0 = f(p);
    let fwd = forward_jacobian(&f, p, &r0, None);
    let cen = central_jacobian(&f, p);
    (0..p.len())
        .map(|j| {
            let scale = cen.column(j).amax();
            (fwd.column(j) - cen.column(j)).amax() / scale
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::film::{effective_temperature, ThermalState};
    use crate::rng::rng_for;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn blob(i0: f64, q0: f64, s: f64) -> BlobFit {
        BlobFit {
            a: 1.0,
            i0,
            q0,
            sigma_i: s,
            sigma_q: s,
            residual_norm: 0.0,
        }
    }

    #[test]
    fn snr_examples() {
        assert_eq!(snr(&blob(1.0, 1.0, 1.0), &blob(1.0, 1.0, 1.0)), 0.0);
        assert_eq!(snr(&blob(1.0, 0.0, 1.0), &blob(0.0, 0.0, 1.0)), 1.0);
        assert_eq!(snr(&blob(1.0, 1.0, 0.5), &blob(0.0, 0.0, 0.5)), 8.0);
    }

    #[test]
    fn snr_from_fitted_clouds() {
        let mut rng = rng_for(77, 0);
        let n = 100_000;
        let mut cloud = |mu: Complex64, s: f64| -> Vec<Complex64> {
            let d = Normal::new(0.0, s).unwrap();
            (0..n)
                .map(|_| mu + Complex64::new(d.sample(&mut rng), d.sample(&mut rng)))
                .collect()
        };
        let (mu_on, mu_off) = (Complex64::new(0.3, 0.1), Complex64::new(0.0, 0.0));
        let (s_on, s_off) = (0.2, 0.25);
        let on = fit_blob(&cloud(mu_on, s_on)).unwrap();
        let off = fit_blob(&cloud(mu_off, s_off)).unwrap();
        let analytic = (mu_on - mu_off).norm_sqr() / (0.25 * (s_on + s_off) * (s_on + s_off));
        assert!((snr(&on, &off) / analytic - 1.0).abs() < 0.05);
    }

    fn eq1_data(n: usize) -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..n).map(|k| 1.0 * k as f64 / (n - 1) as f64).collect();
        let y = x
            .iter()
            .map(|&t| {
                let te = effective_temperature(&ThermalState::new(t, 0.35));
                131.0 / (1.0 - te / 1.1)
            })
            .collect();
        (x, y)
    }

    #[test]
    fn eq1_round_trip() {
        let (x, y) = eq1_data(50);
        let r = fit_curve(BuiltinModel::Eq1Temperature, &x, &y, &[120.0, 1.2, 0.3], None).unwrap();
        assert!(r.converged);
        for (v, t) in r.parameters.iter().zip([131.0, 1.1, 0.35]) {
            assert!((v / t - 1.0).abs() < 1e-3, "{v} vs {t}");
        }
    }

    #[test]
    fn eq2_round_trip() {
        let x: Vec<f64> = (0..40).map(|k| -6.0 + 12.0 * k as f64 / 39.0).collect();
        let y: Vec<f64> = x.iter().map(|i| 139.0 * (1.0 + i * i / (18.0 * 18.0))).collect();
        let r = fit_curve(BuiltinModel::Eq2Current, &x, &y, &[100.0, 10.0], None).unwrap();
        assert!((r.get("i_star_ua").unwrap() / 18.0 - 1.0).abs() < 1e-3);
        assert!((r.get("lk0_nh").unwrap() / 139.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_model_one_step() {
        let x = vec![0.0; 10];
        let y = vec![3.25; 10];
        let r = fit_curve(BuiltinModel::Constant, &x, &y, &[0.0], None).unwrap();
        assert_eq!(r.n_iterations, 1);
        assert_eq!(r.residual_norm, 0.0);
        assert_eq!(r.parameters, vec![3.25]);
    }

    #[test]
    fn lorentzian_and_power_law_round_trip() {
        let truth = [8.2e8, 2.4e7, 0.6, 0.95];
        let x: Vec<f64> = (0..201).map(|k| 7.5e8 + 7e5 * k as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&f| BuiltinModel::ResonanceLorentzian.eval(f, &truth))
            .collect();
        let r = fit_curve(BuiltinModel::ResonanceLorentzian, &x, &y, &[8.1e8, 3e7, 0.5, 1.0], None)
            .unwrap();
        for (v, t) in r.parameters.iter().zip(truth) {
            assert!((v / t - 1.0).abs() < 1e-6);
        }
        let x: Vec<f64> = (0..10).map(|k| 1e-14 * 2f64.powi(k)).collect();
        let y: Vec<f64> = x.iter().map(|p| 1e-21 / p).collect();
        let r = fit_curve(BuiltinModel::PowerLaw, &x, &y, &[0.0, 0.0], None).unwrap();
        assert!((r.get("exponent").unwrap() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn gradient_check_all_models() {
        let (x1, y1) = eq1_data(50);
        let x2: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y2: Vec<f64> = x2.iter().map(|i| 139.0 * (1.0 + i * i / 324.0)).collect();
        let x3: Vec<f64> = (0..101).map(|k| 7.5e8 + 1.4e6 * k as f64).collect();
        let y3 = vec![0.5; 101];
        let x4: Vec<f64> = (0..10).map(|k| 1e-14 * 2f64.powi(k)).collect();
        let y4: Vec<f64> = x4.iter().map(|p| 1e-21 / p).collect();
        let cases: [(BuiltinModel, &[f64], &[f64], &[f64]); 5] = [
            (BuiltinModel::Eq1Temperature, &x1, &y1, &[125.0, 1.15, 0.3]),
            (BuiltinModel::Eq2Current, &x2, &y2, &[130.0, 20.0]),
            // Q = 20: the forward-difference bias grows with Q, see below
            (BuiltinModel::ResonanceLorentzian, &x3, &y3, &[8.2e8, 4.1e7, 0.6, 0.95]),
            (BuiltinModel::PowerLaw, &x4, &y4, &[-20.0, -0.9]),
            (BuiltinModel::Constant, &x2, &y2, &[2.0]),
        ];
        for (m, x, y, p) in cases {
            let d = jacobian_disagreement(m, x, y, p);
            assert!(d < 1e-5, "{m}: {d}");
        }
    }

    #[test]
    fn lorentzian_forward_difference_bias_scales_with_q() {
        // the f0 column carries truncation error ≈ 3·h/FWHM with h ≈ 1e-7·f0
        let f0 = 6.82e8;
        let h = 64.0;
        for q in [20.0, 44.0, 100.0] {
            let g = f0 / q;
            let x: Vec<f64> = (0..121).map(|k| f0 + g * (-3.0 + 0.05 * k as f64)).collect();
            let y = vec![0.8; x.len()];
            let d = jacobian_disagreement(BuiltinModel::ResonanceLorentzian, &x, &y, &[f0, g, 0.46, 1.0]);
            let predicted = 3.0 * h / g;
            assert!((d / predicted - 1.0).abs() < 0.1, "Q {q}: {d} vs {predicted}");
        }
    }

    #[test]
    fn rejects_mismatched_input() {
        assert!(matches!(
            fit_curve(BuiltinModel::Constant, &[1.0], &[1.0, 2.0], &[0.0], None),
            Err(FitError::InvalidInput(_))
        ));
        assert!(matches!(
            fit_curve(BuiltinModel::Constant, &[1.0], &[1.0], &[0.0, 1.0], None),
            Err(FitError::InvalidInput(_))
        ));
    }

    proptest! {
        #[test]
        fn snr_rotation_invariant(theta in 0.0f64..6.3, i in -2.0f64..2.0, q in -2.0f64..2.0, s in 0.1f64..2.0) {
            let rot = Complex64::from_polar(1.0, theta);
            let (a, b) = (Complex64::new(i, q), Complex64::new(-q, 0.5));
            let (ra, rb) = (a * rot, b * rot);
            let base = snr(&blob(a.re, a.im, s), &blob(b.re, b.im, 0.5 * s));
            let turned = snr(&blob(ra.re, ra.im, s), &blob(rb.re, rb.im, 0.5 * s));
            prop_assert!((base - turned).abs() <= 1e-9 * (1.0 + base));
        }
    }
}
