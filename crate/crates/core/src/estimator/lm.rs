//! Damped Gauss-Newton (Levenberg-Marquardt) least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FitError;

pub const STEP_TOL: f64 = 1e-10;
pub const GRAD_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 10_000;
/// Relative finite-difference step.
pub const FD_STEP: f64 = 1e-7;

/// Box constraints; infinite entries leave a side open.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    fn clamp(&self, p: &mut [f64]) {
        for ((x, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(*lo, *hi);
        }
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((x, lo), hi)| *lo <= *x && *x <= *hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub step_tol: f64,
    pub grad_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: MAX_ITERATIONS,
            step_tol: STEP_TOL,
            grad_tol: GRAD_TOL,
        }
    }
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub names: Vec<String>,
    pub parameters: Vec<f64>,
    /// Row-major s²·(JᵀJ)⁻¹; NaN when the normal matrix is singular or there are
    /// no residual degrees of freedom.
    pub covariance: Vec<Vec<f64>>,
    /// ‖r‖₂ at the solution.
    pub residual_norm: f64,
    /// ‖Jᵀr‖∞ at the solution.
    pub gradient_norm: f64,
    pub converged: bool,
    /// Accepted steps.
    pub n_iterations: usize,
}

impl FitReport {
    pub fn stderr(&self) -> Vec<f64> {
        (0..self.parameters.len()).map(|i| self.covariance[i][i].sqrt()).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.parameters[i])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report is plain data")
    }
}

/// Forward step rounded to a power of two so that `p + h - p == h` exactly.
fn fd_step(p: f64) -> f64 {
    let h = FD_STEP * (1.0 + p.abs());
    2f64.powi(h.log2().round() as i32)
}

fn eval(f: &impl Fn(&[f64]) -> Vec<f64>, p: &[f64]) -> Vec<f64> {
    f(p)
}

/// Forward-difference Jacobian (rows = residuals). Steps backwards where a forward
/// step would leave the upper bound.
pub fn forward_jacobian(
    f: &impl Fn(&[f64]) -> Vec<f64>,
    p: &[f64],
    r0: &[f64],
    upper: Option<&[f64]>,
) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(r0.len(), p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let mut h = fd_step(p[j]);
        if upper.is_some_and(|u| p[j] + h > u[j]) {
            h = -h;
        }
        q[j] = p[j] + h;
        let r = eval(f, &q);
        for i in 0..r0.len() {
            jac[(i, j)] = (r[i] - r0[i]) / h;
        }
        q[j] = p[j];
    }
    jac
}

/// Central-difference Jacobian with the same step as [`forward_jacobian`]; used to
/// validate it.
pub fn central_jacobian(f: &impl Fn(&[f64]) -> Vec<f64>, p: &[f64]) -> DMatrix<f64> {
    let m = eval(f, p).len();
    let mut jac = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = fd_step(p[j]);
        q[j] = p[j] + h;
        let hi = eval(f, &q);
        q[j] = p[j] - h;
        let lo = eval(f, &q);
        for i in 0..m {
            jac[(i, j)] = (hi[i] - lo[i]) / (2.0 * h);
        }
        q[j] = p[j];
    }
    jac
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

fn report(
    names: &[String],
    p: Vec<f64>,
    r: &[f64],
    jac: &DMatrix<f64>,
    grad: f64,
    converged: bool,
    n_iterations: usize,
) -> FitReport {
    let n = p.len();
    let dof = r.len() as f64 - n as f64;
    let s2 = if dof > 0.0 { cost(r) / dof } else { f64::NAN };
    let jtj = jac.transpose() * jac;
    let covariance = match jtj.try_inverse() {
        Some(inv) => (0..n).map(|i| (0..n).map(|j| s2 * inv[(i, j)]).collect()).collect(),
        None => vec![vec![f64::NAN; n]; n],
    };
    FitReport {
        names: names.to_vec(),
        parameters: p,
        covariance,
        residual_norm: cost(r).sqrt(),
        gradient_norm: grad,
        converged,
        n_iterations,
    }
}

/// Minimises ‖f(p)‖² from `p0` within `bounds`.
///
/// The damping starts at zero (a pure Gauss-Newton step) and is raised to
/// `1e-3·max diag(JᵀJ)` on the first rejected step, then grows geometrically until a
/// step lowers the cost; Marquardt's diagonal scaling keeps it invariant to parameter
/// units. Steps are clamped to the bounds.
pub fn least_squares(
    f: impl Fn(&[f64]) -> Vec<f64>,
    names: &[String],
    p0: &[f64],
    bounds: &Bounds,
    opts: &LmOptions,
) -> Result<FitReport, FitError> {
    let n = p0.len();
    if n == 0 || names.len() != n || bounds.lower.len() != n || bounds.upper.len() != n {
        return Err(FitError::InvalidInput("parameter, name and bound lengths differ".into()));
    }
    if !bounds.contains(p0) {
        return Err(FitError::InvalidInput("initial guess outside bounds".into()));
    }
    let mut p = p0.to_vec();
    let mut r = eval(&f, &p);
    if r.len() < n {
        return Err(FitError::TooFewPoints {
            needed: n,
            got: r.len(),
        });
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(FitError::NonFiniteResidual);
    }
    let mut c = cost(&r);
    let mut lambda = 0.0;
    let mut nu = 2.0;
    let mut accepted = 0;

    for _ in 0..opts.max_iterations {
        let jac = forward_jacobian(&f, &p, &r, Some(&bounds.upper));
        let rv = DVector::from_column_slice(&r);
        let g = jac.transpose() * &rv;
        let g_inf = g.amax();
        if g_inf < opts.grad_tol {
            return Ok(report(names, p, &r, &jac, g_inf, true, accepted));
        }
        let a = jac.transpose() * &jac;
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let d_max = diag.iter().cloned().fold(0.0, f64::max);
        if !(d_max > 0.0) {
            return Err(FitError::SingularNormalEquations);
        }
        loop {
            let mut m = a.clone();
            for i in 0..n {
                m[(i, i)] += lambda * diag[i].max(1e-12 * d_max);
            }
            let step = solve(&m, &(-&g)).filter(|s| s.iter().all(|x| x.is_finite()));
            let Some(step) = step else {
                if lambda > 1e20 * d_max {
                    return Err(FitError::SingularNormalEquations);
                }
                lambda = if lambda == 0.0 { 1e-3 * d_max } else { lambda * nu };
                nu *= 2.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            bounds.clamp(&mut trial);
            let dp: f64 = trial.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let pn: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            let rel_step = dp / (pn + f64::EPSILON);
            let r_trial = eval(&f, &trial);
            let c_trial = if r_trial.iter().all(|x| x.is_finite()) {
                cost(&r_trial)
            } else {
                f64::INFINITY
            };
            if c_trial <= c {
                p = trial;
                r = r_trial;
                c = c_trial;
                accepted += 1;
                lambda /= 3.0;
                nu = 2.0;
                if rel_step < opts.step_tol {
                    let jac = forward_jacobian(&f, &p, &r, Some(&bounds.upper));
                    let g = jac.transpose() * DVector::from_column_slice(&r);
                    return Ok(report(names, p, &r, &jac, g.amax(), true, accepted));
                }
                break;
            }
            if rel_step < opts.step_tol {
                // no representable step lowers the cost
                return Ok(report(names, p, &r, &jac, g_inf, true, accepted));
            }
            lambda = if lambda == 0.0 { 1e-3 * d_max } else { lambda * nu };
            nu *= 2.0;
        }
    }
    let jac = forward_jacobian(&f, &p, &r, Some(&bounds.upper));
    let g = jac.transpose() * DVector::from_column_slice(&r);
    Err(FitError::NotConverged(Box::new(report(
        names,
        p,
        &r,
        &jac,
        g.amax(),
        false,
        accepted,
    ))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn linear_fit_is_exact() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let f = |p: &[f64]| xs.iter().map(|x| p[0] + p[1] * x - (2.0 + 0.5 * x)).collect();
        let r = least_squares(f, &names(2), &[0.0, 0.0], &Bounds::unbounded(2), &LmOptions::default())
            .unwrap();
        assert!(r.converged);
        assert!((r.parameters[0] - 2.0).abs() < 1e-9 && (r.parameters[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock_converges() {
        let f = |p: &[f64]| vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]];
        let r = least_squares(f, &names(2), &[-1.2, 1.0], &Bounds::unbounded(2), &LmOptions::default())
            .unwrap();
        assert!((r.parameters[0] - 1.0).abs() < 1e-6 && (r.parameters[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_bounds() {
        let f = |p: &[f64]| vec![p[0] - 5.0];
        let b = Bounds::new(vec![0.0], vec![2.0]);
        let r = least_squares(f, &names(1), &[1.0], &b, &LmOptions::default()).unwrap();
        assert_eq!(r.parameters[0], 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        let f = |p: &[f64]| vec![p[0]];
        let b = Bounds::new(vec![0.0], vec![1.0]);
        assert!(matches!(
            least_squares(f, &names(1), &[3.0], &b, &LmOptions::default()),
            Err(FitError::InvalidInput(_))
        ));
        let g = |_: &[f64]| vec![f64::NAN];
        assert_eq!(
            least_squares(g, &names(1), &[0.5], &b, &LmOptions::default()),
            Err(FitError::NonFiniteResidual)
        );
    }

    #[test]
    fn insensitive_parameter_is_singular() {
        let f = |p: &[f64]| vec![p[0] - 1.0, p[0] + 1.0];
        let r = least_squares(f, &names(2), &[0.3, 0.0], &Bounds::unbounded(2), &LmOptions::default());
        // p1 never enters the residual; the normal equations cannot be solved for it
        match r {
            Ok(rep) => assert!(rep.covariance[1][1].is_nan() || rep.covariance[1][1].is_infinite()),
            Err(e) => assert_eq!(e, FitError::SingularNormalEquations),
        }
    }

    #[test]
    fn iteration_cap_returns_report() {
        let f = |p: &[f64]| vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]];
        let opts = LmOptions {
            max_iterations: 2,
            ..LmOptions::default()
        };
        match least_squares(f, &names(2), &[-1.2, 1.0], &Bounds::unbounded(2), &opts) {
            Err(FitError::NotConverged(rep)) => assert!(!rep.converged),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn covariance_matches_linear_theory() {
        // y = a + b x with unit-variance residual pattern
        let xs = [0.0, 1.0, 2.0, 3.0];
        let noise = [0.5, -0.5, -0.5, 0.5];
        let f = |p: &[f64]| {
            xs.iter()
                .zip(&noise)
                .map(|(x, e)| p[0] + p[1] * x - (1.0 + 2.0 * x + e))
                .collect()
        };
        let r = least_squares(f, &names(2), &[0.0, 0.0], &Bounds::unbounded(2), &LmOptions::default())
            .unwrap();
        let s2 = 1.0 / 2.0;
        // (XᵀX)⁻¹ for x = 0..3 has [1][1] = 1/5
        assert!((r.covariance[1][1] - s2 / 5.0).abs() < 1e-9);
        let back: FitReport = toml::from_str(&r.to_toml()).unwrap();
        assert_eq!(back, r);
    }
}
