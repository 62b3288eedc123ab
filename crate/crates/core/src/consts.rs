//! Physical constants (CODATA 2018, exact where the SI defines them) and unit helpers.

/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Electron mass, kg.
pub const M_ELECTRON: f64 = 9.109_383_701_5e-31;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
/// Superconducting resistance quantum h/(2e)^2, Ω (≈ 6.45 kΩ).
pub const R_Q: f64 = PLANCK / (4.0 * E_CHARGE * E_CHARGE);

/// Converts a power in dBm to watts. `-inf` maps to exactly zero.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    if dbm == f64::NEG_INFINITY {
        return 0.0;
    }
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resistance_quantum() {
        assert!((R_Q - 6453.2).abs() < 0.1);
    }

    #[test]
    fn dbm_round_trip() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watts(-30.0) - 1e-6).abs() < 1e-20);
        assert_eq!(dbm_to_watts(f64::NEG_INFINITY), 0.0);
        assert!((watts_to_dbm(dbm_to_watts(-82.0)) + 82.0).abs() < 1e-12);
    }
}
