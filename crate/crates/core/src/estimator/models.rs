//! Built-in curve models for [`fit_curve`](super::fit_curve).

use std::fmt;
use std::str::FromStr;

use super::FitError;

/// How a model value and a datum are turned into a residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Residual {
    /// model − y
    Absolute,
    /// (model − y)/y
    Relative,
    /// log10(model) − log10(y)
    Log10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinModel {
    /// L_K(T_MXC) = lk0 / (1 − (T_MXC⁴ + t_el⁴)^¼ / t_c); x in K, y in nH.
    Eq1Temperature,
    /// L(I_dc) = lk0 · (1 + I_dc²/i_star²) at zero rf current; x in µA, y in nH.
    Eq2Current,
    /// |S11|(f) = baseline − depth / (1 + (2(f − f0)/fwhm)²); x in Hz.
    ResonanceLorentzian,
    /// y = 10^log10_c · x^exponent, fitted in log space.
    PowerLaw,
    /// y = c.
    Constant,
}

pub const ALL_MODELS: [BuiltinModel; 5] = [
    BuiltinModel::Eq1Temperature,
    BuiltinModel::Eq2Current,
    BuiltinModel::ResonanceLorentzian,
    BuiltinModel::PowerLaw,
    BuiltinModel::Constant,
];

impl BuiltinModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Eq1Temperature => "eq1_temperature",
            Self::Eq2Current => "eq2_current",
            Self::ResonanceLorentzian => "resonance_lorentzian",
            Self::PowerLaw => "powerlaw",
            Self::Constant => "constant",
        }
    }

    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            Self::Eq1Temperature => &["lk0_nh", "t_c_k", "t_el_k"],
            Self::Eq2Current => &["lk0_nh", "i_star_ua"],
            Self::ResonanceLorentzian => &["f0_hz", "fwhm_hz", "depth", "baseline"],
            Self::PowerLaw => &["log10_c", "exponent"],
            Self::Constant => &["c"],
        }
    }

    pub fn residual_kind(&self) -> Residual {
        match self {
            Self::Eq1Temperature | Self::Eq2Current => Residual::Relative,
            Self::PowerLaw => Residual::Log10,
            Self::ResonanceLorentzian | Self::Constant => Residual::Absolute,
        }
    }

    pub fn eval(&self, x: f64, p: &[f64]) -> f64 {
        match self {
            Self::Eq1Temperature => {
                let t = (x.powi(4) + p[2].powi(4)).powf(0.25);
                let denom = 1.0 - t / p[1];
                if denom > 0.0 {
                    p[0] / denom
                } else {
                    f64::NAN
                }
            }
            Self::Eq2Current => p[0] * (1.0 + x * x / (p[1] * p[1])),
            Self::ResonanceLorentzian => {
                let u = 2.0 * (x - p[0]) / p[1];
                p[3] - p[2] / (1.0 + u * u)
            }
            Self::PowerLaw => 10f64.powf(p[0] + p[1] * x.log10()),
            Self::Constant => p[0],
        }
    }

    /// Default bounds (lower, upper).
    pub fn default_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let inf = f64::INFINITY;
        match self {
            Self::Eq1Temperature => (vec![1e-3, 1e-3, 1e-3], vec![1e6, 100.0, 100.0]),
            Self::Eq2Current => (vec![1e-3, 1e-6], vec![1e6, 1e6]),
            Self::ResonanceLorentzian => (vec![0.0, 1e-12, -inf, -inf], vec![inf, inf, inf, inf]),
            Self::PowerLaw => (vec![-inf, -inf], vec![inf, inf]),
            Self::Constant => (vec![-inf], vec![inf]),
        }
    }

    /// Residual of one datum.
    pub fn residual(&self, x: f64, y: f64, p: &[f64]) -> f64 {
        let m = self.eval(x, p);
        match self.residual_kind() {
            Residual::Absolute => m - y,
            Residual::Relative => (m - y) / y,
            Residual::Log10 => m.log10() - y.log10(),
        }
    }
}

impl fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinModel {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_MODELS
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FitError::InvalidInput(format!("unknown model `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in ALL_MODELS {
            assert_eq!(m.name().parse::<BuiltinModel>().unwrap(), m);
            assert_eq!(m.parameter_names().len(), m.default_bounds().0.len());
        }
        assert!("cubic".parse::<BuiltinModel>().is_err());
    }

    #[test]
    fn model_values() {
        let m = BuiltinModel::Eq1Temperature;
        assert_eq!(m.eval(0.0, &[100.0, 1.0, 0.5]), 200.0);
        assert!(m.eval(1.2, &[100.0, 1.0, 0.5]).is_nan());
        assert_eq!(BuiltinModel::Eq2Current.eval(10.0, &[100.0, 10.0]), 200.0);
        let l = BuiltinModel::ResonanceLorentzian;
        assert_eq!(l.eval(5.0, &[5.0, 2.0, 0.4, 1.0]), 0.6);
        assert_eq!(l.eval(6.0, &[5.0, 2.0, 0.4, 1.0]), 0.8);
        assert!((BuiltinModel::PowerLaw.eval(100.0, &[1.0, -1.0]) - 0.1).abs() < 1e-15);
    }
}
