//! Lumped-element reflectometry network around the kinetic inductor.
//!
//! ```text
//!            C_c
//!  port o----||----+-----------+-------------+-----------+
//!                  |           |             |           |
//!                  C          C_p        R_contact    R_shunt (SET)
//!                  |           |             |           |
//!                  |           |            L_K          |
//!                  |           |             |           |
//!  gnd  o----------+-----------+-------------+-----------+
//! ```
//!
//! The inductor branch (R_contact in series with L_K) is shunted by its parasitic
//! capacitance C_p; the resonator capacitor C and the SET channel resistance sit in
//! parallel with it, and the whole tank is coupled to the Z_0 line through C_c.

mod dip;
mod network;
mod nonlinear;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::film::FilmError;

pub use dip::{dip_from_samples, find_resonance, ResonanceSummary};
pub use network::{
    characteristic_impedance, drive_response, input_impedance, input_impedance_with,
    lk_from_resonance, s11, s11_with, source_amplitude, DriveResponse, Inductor,
};
pub use nonlinear::{
    nonlinear_operating_point, operating_s11, photon_number, self_kerr, stored_energy,
    sweep_frequency, sweep_power, Drive, FilmState, OperatingPoint, SweepMode, SweepPoint,
    BRANCH_JUMP_THRESHOLD, DAMPING, MAX_ITERATIONS, REL_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResonatorError {
    #[error("invalid resonator parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("no resonance between {f_lo} Hz and {f_hi} Hz")]
    NoResonanceInRange { f_lo: f64, f_hi: f64 },
    #[error("operating point did not converge after {} iterations", .last.iterations)]
    NotConverged { last: Box<OperatingPoint> },
    #[error(transparent)]
    Film(#[from] FilmError),
}

/// Lumped-element values of the matching network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSpec {
    pub c_c_ff: f64,
    pub c_ff: f64,
    pub c_p_ff: f64,
    #[serde(default)]
    pub r_contact_ohm: f64,
    #[serde(default = "default_z0")]
    pub z0_ohm: f64,
}

fn default_z0() -> f64 {
    50.0
}

impl ResonatorSpec {
    /// The integrated circuit: C_c = 164 fF, C = 114 fF, C_p = 6.3 fF.
    pub fn integrated() -> Self {
        Self {
            c_c_ff: 164.0,
            c_ff: 114.0,
            c_p_ff: 6.3,
            r_contact_ohm: 5.0,
            z0_ohm: default_z0(),
        }
    }

    /// C_c + C + C_p, fF.
    pub fn c_tot_ff(&self) -> f64 {
        self.c_c_ff + self.c_ff + self.c_p_ff
    }

    pub fn validate(&self) -> Result<(), ResonatorError> {
        for (name, value) in [
            ("c_c_ff", self.c_c_ff),
            ("c_ff", self.c_ff),
            ("c_p_ff", self.c_p_ff),
            ("z0_ohm", self.z0_ohm),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ResonatorError::InvalidParameter { name, value });
            }
        }
        if !(self.r_contact_ohm.is_finite() && self.r_contact_ohm >= 0.0) {
            return Err(ResonatorError::InvalidParameter {
                name: "r_contact_ohm",
                value: self.r_contact_ohm,
            });
        }
        Ok(())
    }
}
