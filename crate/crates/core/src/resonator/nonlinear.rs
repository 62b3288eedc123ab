use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{drive_response, s11_with, source_amplitude, Inductor};
use super::{ResonatorError, ResonatorSpec};
use crate::consts::{dbm_to_watts, HBAR};
use crate::film::{
    lk_of_current, lk_of_temperature, switching_current, BiasState, FilmSpec, ThermalState,
};

/// Relative change of L_K and I_rf between iterates that counts as converged.
pub const REL_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 10_000;
/// Weight of the new estimate in each fixed-point update.
pub const DAMPING: f64 = 0.5;
/// Relative I_rf change between neighbouring sweep points flagged as a branch jump.
pub const BRANCH_JUMP_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilmState {
    Superconducting,
    Normal,
}

impl FilmState {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilmState::Superconducting => "superconducting",
            FilmState::Normal => "normal",
        }
    }
}

/// Drive conditions for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub frequency_hz: f64,
    /// Available power at the resonator input, dBm. `-inf` means no drive.
    pub power_dbm: f64,
    pub i_dc_ua: f64,
    /// Resistance in parallel with the inductor (the SET channel), Ω.
    pub r_shunt_ohm: f64,
}

/// Self-consistent state of the driven nonlinear resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub frequency_hz: f64,
    pub drive_power_dbm: f64,
    /// Effective kinetic inductance; NaN once the film has switched normal.
    pub lk_effective_nh: f64,
    /// RMS rf current through the inductor branch, µA.
    pub i_rf_ua: f64,
    pub state: FilmState,
    pub converged: bool,
    pub iterations: usize,
}

impl OperatingPoint {
    pub fn i_rf_peak_ua(&self) -> f64 {
        self.i_rf_ua * SQRT_2
    }

    pub fn inductor(&self, film: &FilmSpec) -> Inductor {
        match self.state {
            FilmState::Superconducting => Inductor::Superconducting {
                lk_nh: self.lk_effective_nh,
            },
            FilmState::Normal => Inductor::Normal {
                r_normal_ohm: film.r_normal_kohm * 1e3,
            },
        }
    }
}

fn inductor_rms_ua(spec: &ResonatorSpec, inductor: &Inductor, drive: &Drive, v_src: f64) -> f64 {
    let r = drive_response(spec, inductor, drive.r_shunt_ohm, drive.frequency_hz, v_src);
    r.i_inductor.norm() / SQRT_2 * 1e6
}

/// Solves for the rf current and inductance that are consistent with each other.
///
/// Damped fixed-point iteration: the inductance follows the current through the
/// quadratic nonlinearity, the linear network at that inductance gives a new inductor
/// current, and the estimate moves halfway towards it. Once the peak current
/// |I_dc| + √2·I_rf exceeds the switching current the film is treated as normal.
///
/// Failure to converge (bistable or oscillating region) is returned as
/// [`ResonatorError::NotConverged`] carrying the last iterate; sweeps should warm-start
/// from the previous point to stay on one branch.
pub fn nonlinear_operating_point(
    spec: &ResonatorSpec,
    film: &FilmSpec,
    th: &ThermalState,
    drive: &Drive,
    warm_start: Option<&OperatingPoint>,
) -> Result<OperatingPoint, ResonatorError> {
    let lk_t = lk_of_temperature(film, th)?;
    let i_sw = switching_current(film);
    let v_src = source_amplitude(spec.z0_ohm, dbm_to_watts(drive.power_dbm));
    let lk_at = |i_rf: f64| {
        lk_of_current(
            film,
            &BiasState {
                i_dc_ua: drive.i_dc_ua,
                i_rf_ua: i_rf,
            },
            lk_t,
        )
    };
    let normal = |iterations: usize| {
        let inductor = Inductor::Normal {
            r_normal_ohm: film.r_normal_kohm * 1e3,
        };
        OperatingPoint {
            frequency_hz: drive.frequency_hz,
            drive_power_dbm: drive.power_dbm,
            lk_effective_nh: f64::NAN,
            i_rf_ua: inductor_rms_ua(spec, &inductor, drive, v_src),
            state: FilmState::Normal,
            converged: true,
            iterations,
        }
    };
    if drive.i_dc_ua.abs() > i_sw {
        return Ok(normal(0));
    }

    let mut i_rf = warm_start
        .filter(|w| w.state == FilmState::Superconducting && w.i_rf_ua.is_finite())
        .map_or(0.0, |w| w.i_rf_ua);
    let mut lk = lk_at(i_rf);
    for iteration in 1..=MAX_ITERATIONS {
        let target = inductor_rms_ua(spec, &Inductor::Superconducting { lk_nh: lk }, drive, v_src);
        let next = (1.0 - DAMPING) * i_rf + DAMPING * target;
        if drive.i_dc_ua.abs() + SQRT_2 * next > i_sw {
            return Ok(normal(iteration));
        }
        let lk_next = lk_at(next);
        let d_lk = (lk_next - lk).abs() / lk;
        let d_i = if next > 0.0 { (next - i_rf).abs() / next } else { 0.0 };
        i_rf = next;
        lk = lk_next;
        if d_lk < REL_TOL && d_i < REL_TOL {
            return Ok(OperatingPoint {
                frequency_hz: drive.frequency_hz,
                drive_power_dbm: drive.power_dbm,
                lk_effective_nh: lk,
                i_rf_ua: i_rf,
                state: FilmState::Superconducting,
                converged: true,
                iterations: iteration,
            });
        }
    }
    Err(ResonatorError::NotConverged {
        last: Box::new(OperatingPoint {
            frequency_hz: drive.frequency_hz,
            drive_power_dbm: drive.power_dbm,
            lk_effective_nh: lk,
            i_rf_ua: i_rf,
            state: FilmState::Superconducting,
            converged: false,
            iterations: MAX_ITERATIONS,
        }),
    })
}

/// Reflection coefficient of the network at a solved operating point.
pub fn operating_s11(
    spec: &ResonatorSpec,
    film: &FilmSpec,
    op: &OperatingPoint,
    r_shunt_ohm: f64,
) -> Complex64 {
    s11_with(spec, &op.inductor(film), r_shunt_ohm, op.frequency_hz)
}

/// Self-Kerr coefficient in Hz per photon (negative: the resonance softens).
///
/// One photon adds a mean-square current ħω_r/L_K, the fractional inductance change
/// is ⟨I²⟩/I*², and δf/f = −½·δL/L, giving K = −π ħ f_r² / (L_K I*²).
pub fn self_kerr(film: &FilmSpec, f_r_hz: f64, lk_nh: f64) -> f64 {
    let i_star = film.i_star_ua * 1e-6;
    -PI * HBAR * f_r_hz * f_r_hz / (lk_nh * 1e-9 * i_star * i_star)
}

/// Energy stored in the resonator at an operating point, L_K·I_rms² (J).
pub fn stored_energy(op: &OperatingPoint) -> f64 {
    let i = op.i_rf_ua * 1e-6;
    op.lk_effective_nh * 1e-9 * i * i
}

/// Stored energy divided by ħω at the given resonance frequency.
pub fn photon_number(op: &OperatingPoint, f_r_hz: f64) -> f64 {
    stored_energy(op) / (HBAR * 2.0 * PI * f_r_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Points are solved in order, each starting from the previous solution.
    WarmStarted,
    /// Points are solved independently from zero current, in parallel.
    Independent,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub result: Result<OperatingPoint, ResonatorError>,
    /// Set when I_rf changed by more than [`BRANCH_JUMP_THRESHOLD`] relative to the
    /// previous converged superconducting point.
    pub branch_jump: bool,
}

impl SweepPoint {
    /// The solved point, or the last iterate of a non-converged solve.
    pub fn point(&self) -> Option<OperatingPoint> {
        match &self.result {
            Ok(op) => Some(*op),
            Err(ResonatorError::NotConverged { last }) => Some(**last),
            Err(_) => None,
        }
    }
}

fn flag_jumps(results: Vec<Result<OperatingPoint, ResonatorError>>) -> Vec<SweepPoint> {
    let mut prev: Option<f64> = None;
    results
        .into_iter()
        .map(|result| {
            let mut jump = false;
            if let Ok(op) = &result {
                if op.state == FilmState::Superconducting {
                    if let Some(p) = prev {
                        let scale = p.max(op.i_rf_ua);
                        jump = scale > 0.0 && (op.i_rf_ua - p).abs() / scale > BRANCH_JUMP_THRESHOLD;
                    }
                    prev = Some(op.i_rf_ua);
                }
            }
            SweepPoint {
                result,
                branch_jump: jump,
            }
        })
        .collect()
}

fn run_sweep(
    drives: Vec<Drive>,
    mode: SweepMode,
    solve: impl Fn(&Drive, Option<&OperatingPoint>) -> Result<OperatingPoint, ResonatorError> + Sync,
) -> Vec<SweepPoint> {
    let results = match mode {
        SweepMode::Independent => drives.par_iter().map(|d| solve(d, None)).collect(),
        SweepMode::WarmStarted => {
            let mut warm: Option<OperatingPoint> = None;
            drives
                .iter()
                .map(|d| {
                    let r = solve(d, warm.as_ref());
                    match &r {
                        Ok(op) if op.state == FilmState::Superconducting => warm = Some(*op),
                        _ => {}
                    }
                    r
                })
                .collect()
        }
    };
    flag_jumps(results)
}

/// Frequency sweep at fixed power; `base.frequency_hz` is ignored.
pub fn sweep_frequency(
    spec: &ResonatorSpec,
    film: &FilmSpec,
    th: &ThermalState,
    base: &Drive,
    freqs_hz: &[f64],
    mode: SweepMode,
) -> Vec<SweepPoint> {
    let drives = freqs_hz
        .iter()
        .map(|&f| Drive {
            frequency_hz: f,
            ..*base
        })
        .collect();
    run_sweep(drives, mode, |d, w| nonlinear_operating_point(spec, film, th, d, w))
}

/// Power sweep at fixed frequency; `base.power_dbm` is ignored.
pub fn sweep_power(
    spec: &ResonatorSpec,
    film: &FilmSpec,
    th: &ThermalState,
    base: &Drive,
    powers_dbm: &[f64],
    mode: SweepMode,
) -> Vec<SweepPoint> {
    let drives = powers_dbm
        .iter()
        .map(|&p| Drive {
            power_dbm: p,
            ..*base
        })
        .collect();
    run_sweep(drives, mode, |d, w| nonlinear_operating_point(spec, film, th, d, w))
}
