//! TiN thin-film physics: kinetic inductance versus temperature and current,
//! switching current, and the two-state I-V / R-T models.
//!
//! All functions are pure. Public units: µm, nm, K, µA, nH, kΩ, mV.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consts::{E_CHARGE, M_ELECTRON};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilmError {
    #[error("invalid film parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("effective temperature {t_eff} K is not below T_C = {t_c} K (film is normal)")]
    TemperatureAboveCritical { t_eff: f64, t_c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilmType {
    TypeA,
    TypeB,
}

/// Geometry and material parameters of one TiN strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilmSpec {
    pub width_um: f64,
    pub length_um: f64,
    pub thickness_nm: f64,
    pub t_c_k: f64,
    /// Sheet kinetic inductance at T = 0, I = 0, in nH per square.
    pub sheet_lk0_nh: f64,
    /// Critical current density, A/mm².
    pub j_c_a_per_mm2: f64,
    /// Current scale of the quadratic nonlinearity, µA.
    pub i_star_ua: f64,
    pub r_normal_kohm: f64,
    pub film_type: FilmType,
    /// Logistic width of the resistive transition in K. Zero is a hard step.
    #[serde(default)]
    pub transition_width_k: f64,
}

impl FilmSpec {
    /// Type A poly-resistor film: 139 squares of 1.07 nH/□ (≈ 149 nH), T_C = 0.75 K.
    pub fn type_a() -> Self {
        Self {
            width_um: 3.6,
            length_um: 500.4,
            thickness_nm: 6.0,
            t_c_k: 0.75,
            sheet_lk0_nh: 1.07,
            j_c_a_per_mm2: 94.0,
            i_star_ua: 12.0,
            r_normal_kohm: 81.0,
            film_type: FilmType::TypeA,
            transition_width_k: 0.0,
        }
    }

    /// Type B poly-resistor film: 139 squares of 0.94 nH/□ (≈ 131 nH), T_C = 1.1 K.
    pub fn type_b() -> Self {
        Self {
            width_um: 3.6,
            length_um: 500.4,
            thickness_nm: 6.0,
            t_c_k: 1.1,
            sheet_lk0_nh: 0.94,
            j_c_a_per_mm2: 260.0,
            i_star_ua: 18.0,
            r_normal_kohm: 104.0,
            film_type: FilmType::TypeB,
            transition_width_k: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), FilmError> {
        let positive = [
            ("width_um", self.width_um),
            ("length_um", self.length_um),
            ("thickness_nm", self.thickness_nm),
            ("t_c_k", self.t_c_k),
            ("sheet_lk0_nh", self.sheet_lk0_nh),
            ("j_c_a_per_mm2", self.j_c_a_per_mm2),
            ("i_star_ua", self.i_star_ua),
            ("r_normal_kohm", self.r_normal_kohm),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(FilmError::InvalidParameter { name, value });
            }
        }
        if !(self.transition_width_k.is_finite() && self.transition_width_k >= 0.0) {
            return Err(FilmError::InvalidParameter {
                name: "transition_width_k",
                value: self.transition_width_k,
            });
        }
        Ok(())
    }

    /// Number of squares, L/W.
    pub fn n_squares(&self) -> f64 {
        self.length_um / self.width_um
    }

    /// Zero-temperature, zero-current kinetic inductance of the strip, nH.
    pub fn lk0_nh(&self) -> f64 {
        self.n_squares() * self.sheet_lk0_nh
    }

    /// Cooper-pair density n_s(0) (m⁻³) implied by the sheet inductance through
    /// L_sheet = m / (2 n_s e² t). Informational only; never used in simulation.
    pub fn cooper_pair_density(&self) -> f64 {
        let t = self.thickness_nm * 1e-9;
        let l_sheet = self.sheet_lk0_nh * 1e-9;
        M_ELECTRON / (2.0 * E_CHARGE * E_CHARGE * t * l_sheet)
    }
}

/// Mixing-chamber temperature plus the floor set by on-chip dissipation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalState {
    pub t_mxc_k: f64,
    #[serde(default = "default_t_el")]
    pub t_el_k: f64,
}

fn default_t_el() -> f64 {
    0.35
}

impl ThermalState {
    pub fn new(t_mxc_k: f64, t_el_k: f64) -> Self {
        Self { t_mxc_k, t_el_k }
    }

    pub fn at_base(t_mxc_k: f64) -> Self {
        Self::new(t_mxc_k, default_t_el())
    }
}

impl Default for ThermalState {
    fn default() -> Self {
        Self::at_base(0.0)
    }
}

/// Currents through the film. `i_rf_ua` is the RMS value of the rf current.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiasState {
    pub i_dc_ua: f64,
    pub i_rf_ua: f64,
}

/// Effective film temperature (T_MXC⁴ + T_el⁴)^¼, K.
pub fn effective_temperature(th: &ThermalState) -> f64 {
    (th.t_mxc_k.powi(4) + th.t_el_k.powi(4)).powf(0.25)
}

/// Zero-current kinetic inductance at the effective temperature, nH.
pub fn lk_of_temperature(spec: &FilmSpec, th: &ThermalState) -> Result<f64, FilmError> {
    let t = effective_temperature(th);
    if t >= spec.t_c_k {
        return Err(FilmError::TemperatureAboveCritical {
            t_eff: t,
            t_c: spec.t_c_k,
        });
    }
    Ok(spec.lk0_nh() / (1.0 - t / spec.t_c_k))
}

/// Current-dependent kinetic inductance: `lk0_at_t · (1 + (I_dc² + 2 I_dc I_rf + I_rf²)/I*²)`.
pub fn lk_of_current(spec: &FilmSpec, bias: &BiasState, lk0_at_t: f64) -> f64 {
    let istar2 = spec.i_star_ua * spec.i_star_ua;
    let (dc, rf) = (bias.i_dc_ua, bias.i_rf_ua);
    // grouped so that swapping I_dc and I_rf is bit-exact
    lk0_at_t * (1.0 + ((dc * dc + rf * rf) + 2.0 * (dc * rf)) / istar2)
}

/// Switching current J_c · W · t, µA.
pub fn switching_current(spec: &FilmSpec) -> f64 {
    // A/mm² · µm · nm = 1e6 A/m² · 1e-6 m · 1e-9 m = 1e-9 A = 1e-3 µA
    spec.j_c_a_per_mm2 * spec.width_um * spec.thickness_nm * 1e-3
}

/// Switching current at temperature `t_k` using the depairing form
/// I_sw(0)·(1 − (T/T_C)²)^{3/2}; zero at and above T_C.
pub fn switching_current_at(spec: &FilmSpec, t_k: f64) -> f64 {
    let r = t_k / spec.t_c_k;
    if r >= 1.0 {
        return 0.0;
    }
    switching_current(spec) * (1.0 - r * r).powf(1.5)
}

/// Four-point voltage (mV) for each current (µA) using the abrupt switch at `I_sw`.
pub fn iv_curve(spec: &FilmSpec, currents_ua: &[f64]) -> Vec<f64> {
    iv_curve_with_switching(spec, switching_current(spec), currents_ua)
}

/// As [`iv_curve`] with an explicit switching current (µA). `|I| <= i_sw` is superconducting.
pub fn iv_curve_with_switching(spec: &FilmSpec, i_sw_ua: f64, currents_ua: &[f64]) -> Vec<f64> {
    currents_ua
        .iter()
        .map(|&i| {
            if i.abs() <= i_sw_ua && i_sw_ua > 0.0 {
                0.0
            } else {
                // µA · kΩ = mV
                spec.r_normal_kohm * i
            }
        })
        .collect()
}

/// Four-point resistance (kΩ) at temperature `t_k`.
///
/// Hard step by default with T = T_C on the normal side; a positive
/// `transition_width_k` switches to a logistic transition centred on T_C.
pub fn resistance_of_temperature(spec: &FilmSpec, t_k: f64) -> f64 {
    let w = spec.transition_width_k;
    if w > 0.0 {
        spec.r_normal_kohm / (1.0 + (-(t_k - spec.t_c_k) / w).exp())
    } else if t_k < spec.t_c_k {
        0.0
    } else {
        spec.r_normal_kohm
    }
}
