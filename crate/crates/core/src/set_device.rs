//! Constant-interaction model of the single-electron transistor.
//!
//! Conventions: the bias `V_DS` is applied to the source lead (capacitance `C_S`)
//! while the drain lead (`C_D`) is the reference. The island level of the
//! transition nearest a gate voltage is
//!
//! ```text
//! ε = −(C_G·δV_GS + C_S·V_DS)/C_Σ + k·E_C
//! ```
//!
//! and transport is open when some level lies in the bias window between the two
//! lead Fermi levels (0 and −e·V_DS). The diamond edges then have slopes
//! `+C_G/(C_G + C_D)` and `−C_G/C_S` in the (V_GS, V_DS) plane and the diamond
//! half-height is E_C/e. Outside the window the conductance falls off with the
//! thermal `cosh⁻²(d / 2.5 k_B T_e)` lineshape in the distance `d` to the window,
//! and never drops below the blockade floor 1/R_off.
//!
//! The map is symmetric under V_DS → −V_DS (and the current therefore odd) when
//! `C_S = C_G + C_D`, which the default device satisfies.
//!
//! Units: capacitances aF, voltages mV, energies meV, conductance µS, resistance kΩ,
//! current nA.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consts::{E_CHARGE, K_B};

/// e / (1 aF) expressed in mV.
const E_OVER_AF_MV: f64 = E_CHARGE / 1e-18 * 1e3;
/// k_B / e in meV per K.
const KB_MEV_PER_K: f64 = K_B / E_CHARGE * 1e3;
/// Maximum trapezoid step for the current integral, mV.
pub const CURRENT_STEP_MV: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    pub c_g_af: f64,
    pub c_s_af: f64,
    pub c_d_af: f64,
    /// Peak conductance, µS.
    pub g_max_us: f64,
    /// Electron temperature, K.
    pub t_e_k: f64,
    /// Blockade resistance, GΩ.
    #[serde(default = "default_r_off")]
    pub r_off_gohm: f64,
    /// Gate voltage of the reference Coulomb peak, mV.
    #[serde(default)]
    pub v_gs_offset_mv: f64,
    /// Charge label N of the reference peak (N ↔ N+1 transition).
    #[serde(default)]
    pub charge_offset: i64,
}

fn default_r_off() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiasPoint {
    pub v_gs_mv: f64,
    pub v_ds_mv: f64,
}

impl BiasPoint {
    pub fn new(v_gs_mv: f64, v_ds_mv: f64) -> Self {
        Self { v_gs_mv, v_ds_mv }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SetError {
    #[error("invalid SET parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("charging energy {e_c_mev} meV does not exceed k_B T_e = {kt_mev} meV")]
    NoBlockade { e_c_mev: f64, kt_mev: f64 },
}

impl Default for SetSpec {
    /// 20 mV gate period, 4 meV charging energy, α_G = 0.2, R_SET = 60 kΩ on a peak.
    fn default() -> Self {
        Self {
            c_g_af: 8.0,
            c_s_af: 20.0,
            c_d_af: 12.0,
            g_max_us: 1e3 / 60.0,
            t_e_k: 0.35,
            r_off_gohm: default_r_off(),
            v_gs_offset_mv: 0.0,
            charge_offset: 0,
        }
    }
}

impl SetSpec {
    pub fn validate(&self) -> Result<(), SetError> {
        for (name, value) in [
            ("c_g_af", self.c_g_af),
            ("c_s_af", self.c_s_af),
            ("c_d_af", self.c_d_af),
            ("g_max_us", self.g_max_us),
            ("t_e_k", self.t_e_k),
            ("r_off_gohm", self.r_off_gohm),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SetError::InvalidParameter { name, value });
            }
        }
        if !self.v_gs_offset_mv.is_finite() {
            return Err(SetError::InvalidParameter {
                name: "v_gs_offset_mv",
                value: self.v_gs_offset_mv,
            });
        }
        let (e_c_mev, kt_mev) = (self.charging_energy_mev(), KB_MEV_PER_K * self.t_e_k);
        if e_c_mev <= kt_mev {
            return Err(SetError::NoBlockade { e_c_mev, kt_mev });
        }
        Ok(())
    }

    pub fn c_sigma_af(&self) -> f64 {
        self.c_g_af + self.c_s_af + self.c_d_af
    }

    /// E_C = e²/C_Σ, meV.
    pub fn charging_energy_mev(&self) -> f64 {
        E_OVER_AF_MV / self.c_sigma_af()
    }

    /// α_G = C_G / C_Σ.
    pub fn lever_arm(&self) -> f64 {
        self.c_g_af / self.c_sigma_af()
    }

    /// Coulomb-peak spacing e/C_G, mV.
    pub fn gate_period_mv(&self) -> f64 {
        E_OVER_AF_MV / self.c_g_af
    }

    /// Blockade floor 1/R_off, µS.
    pub fn g_off_us(&self) -> f64 {
        1e-3 / self.r_off_gohm
    }

    /// Gate voltage of the Coulomb peak with index `k` (transition N+k ↔ N+k+1), mV.
    pub fn peak_position_mv(&self, k: i64) -> f64 {
        self.v_gs_offset_mv + k as f64 * self.gate_period_mv()
    }

    /// Charge label of the transition whose peak is nearest to `v_gs_mv`.
    pub fn transition_index(&self, v_gs_mv: f64) -> i64 {
        self.charge_offset + ((v_gs_mv - self.v_gs_offset_mv) / self.gate_period_mv()).round() as i64
    }

    /// Slopes (positive, negative) of the diamond edges dV_DS/dV_GS.
    pub fn edge_slopes(&self) -> (f64, f64) {
        (
            self.c_g_af / (self.c_g_af + self.c_d_af),
            -self.c_g_af / self.c_s_af,
        )
    }
}

fn sech2(x: f64) -> f64 {
    let t = (-2.0 * x.abs()).exp();
    4.0 * t / ((1.0 + t) * (1.0 + t))
}

/// Energy distance (meV) from the bias window to the nearest transition level.
fn window_distance(spec: &SetSpec, bias: &BiasPoint) -> f64 {
    let period = spec.gate_period_mv();
    let dv = bias.v_gs_mv - spec.v_gs_offset_mv;
    let reduced = dv - (dv / period).round() * period;
    let e_c = spec.charging_energy_mev();
    let level = -(spec.c_g_af * reduced + spec.c_s_af * bias.v_ds_mv) / spec.c_sigma_af();
    let (lo, hi) = if bias.v_ds_mv >= 0.0 {
        (-bias.v_ds_mv, 0.0)
    } else {
        (0.0, -bias.v_ds_mv)
    };
    let k = ((lo - level) / e_c).ceil();
    let above = level + k * e_c;
    if above <= hi {
        return 0.0;
    }
    (above - hi).min(lo - (above - e_c))
}

/// Differential conductance (µS) at a bias point.
pub fn conductance(spec: &SetSpec, bias: &BiasPoint) -> f64 {
    let kt = KB_MEV_PER_K * spec.t_e_k;
    let d = window_distance(spec, bias);
    (spec.g_max_us * sech2(d / (2.5 * kt))).max(spec.g_off_us())
}

/// Channel resistance 1/G (kΩ); at most R_off.
pub fn resistance(spec: &SetSpec, bias: &BiasPoint) -> f64 {
    1e3 / conductance(spec, bias)
}

/// Drain current (nA): trapezoid integral of the conductance from 0 to V_DS.
pub fn current(spec: &SetSpec, bias: &BiasPoint) -> f64 {
    let v = bias.v_ds_mv;
    if v == 0.0 {
        return 0.0;
    }
    let n = (v.abs() / CURRENT_STEP_MV).ceil().max(1.0) as usize;
    let h = v / n as f64;
    let g = |k: usize| {
        conductance(
            spec,
            &BiasPoint {
                v_gs_mv: bias.v_gs_mv,
                v_ds_mv: h * k as f64,
            },
        )
    };
    let inner: f64 = (1..n).map(g).sum();
    h * (0.5 * (g(0) + g(n)) + inner)
}

/// One cell of a charge-stability map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub v_gs_mv: f64,
    pub v_ds_mv: f64,
    pub g_us: f64,
    pub i_na: f64,
}

/// Evaluates conductance and current on the grid `v_gs × v_ds` (V_GS-major order).
pub fn stability_map(spec: &SetSpec, v_gs_mv: &[f64], v_ds_mv: &[f64], parallel: bool) -> Vec<MapPoint> {
    let cell = |idx: usize| {
        let bias = BiasPoint::new(v_gs_mv[idx / v_ds_mv.len()], v_ds_mv[idx % v_ds_mv.len()]);
        MapPoint {
            v_gs_mv: bias.v_gs_mv,
            v_ds_mv: bias.v_ds_mv,
            g_us: conductance(spec, &bias),
            i_na: current(spec, &bias),
        }
    };
    let n = v_gs_mv.len() * v_ds_mv.len();
    if parallel {
        (0..n).into_par_iter().map(cell).collect()
    } else {
        (0..n).map(cell).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cold() -> SetSpec {
        SetSpec {
            t_e_k: 0.02,
            ..SetSpec::default()
        }
    }

    #[test]
    fn default_scales() {
        let s = SetSpec::default();
        s.validate().unwrap();
        assert!((s.gate_period_mv() - 20.027).abs() < 1e-3);
        assert!((s.charging_energy_mev() - 4.0054).abs() < 1e-3);
        assert!((s.lever_arm() - 0.2).abs() < 1e-12);
        // on-peak resistance is above 8 R_Q
        assert!(1e3 / s.g_max_us > 8.0 * crate::consts::R_Q * 1e-3);
    }

    #[test]
    fn peak_and_blockade_levels() {
        let s = SetSpec::default();
        assert_eq!(conductance(&s, &BiasPoint::new(0.0, 0.0)), s.g_max_us);
        let mid = 0.5 * s.gate_period_mv();
        assert_eq!(conductance(&s, &BiasPoint::new(mid, 0.0)), s.g_off_us());
        assert_eq!(resistance(&s, &BiasPoint::new(mid, 0.0)), s.r_off_gohm * 1e6);
        assert!((resistance(&s, &BiasPoint::new(0.0, 0.0)) - 60.0).abs() < 1e-9);
    }

    #[test]
    fn zero_bias_lineshape() {
        let s = SetSpec::default();
        let kt = KB_MEV_PER_K * s.t_e_k;
        for dv in [0.05, 0.2, 0.5] {
            let expected = s.g_max_us / ((s.lever_arm() * dv / (2.5 * kt)).cosh().powi(2));
            let g = conductance(&s, &BiasPoint::new(dv, 0.0));
            assert!((g - expected.max(s.g_off_us())).abs() < 1e-12 * s.g_max_us);
        }
    }

    #[test]
    fn diamond_half_height_from_scan() {
        let s = cold();
        let period = s.gate_period_mv();
        let e_c = s.charging_energy_mev();
        let v_ds: Vec<f64> = (0..=2000).map(|k| 0.005 * k as f64).collect();
        let mut max_height: f64 = 0.0;
        for i in 0..=400 {
            let v_gs = period * i as f64 / 400.0;
            let height = v_ds
                .iter()
                .take_while(|&&v| conductance(&s, &BiasPoint::new(v_gs, v)) < 0.5 * s.g_max_us)
                .last()
                .copied()
                .unwrap_or(0.0);
            max_height = max_height.max(height);
        }
        assert!((max_height - e_c).abs() / e_c < 0.01, "{max_height} vs {e_c}");
    }

    #[test]
    fn edge_slopes_match_model() {
        let s = cold();
        let (up, down) = s.edge_slopes();
        // walk along each edge away from the peak at V_GS = 0; the half-maximum
        // contour sits on the edge, so G is G_max just inside and blocked just outside
        for dv in [0.5, 2.0, 5.0] {
            let on = conductance(&s, &BiasPoint::new(dv, up * dv + 0.05));
            let off = conductance(&s, &BiasPoint::new(dv, up * dv - 0.05));
            assert!(on > 0.99 * s.g_max_us && off < 0.01 * s.g_max_us);
            let on = conductance(&s, &BiasPoint::new(dv, down * dv - 0.05));
            let off = conductance(&s, &BiasPoint::new(dv, down * dv + 0.05));
            assert!(on > 0.99 * s.g_max_us && off < 0.01 * s.g_max_us);
        }
    }

    #[test]
    fn diamonds_close_at_zero_bias() {
        let s = cold();
        for k in -2..=2 {
            let v = s.peak_position_mv(k);
            assert!((conductance(&s, &BiasPoint::new(v, 1e-3)) - s.g_max_us).abs() < 1e-9);
            assert!((conductance(&s, &BiasPoint::new(v, -1e-3)) - s.g_max_us).abs() < 1e-9);
        }
    }

    #[test]
    fn current_examples() {
        let s = SetSpec::default();
        assert_eq!(current(&s, &BiasPoint::new(3.0, 0.0)), 0.0);
        let mid = 0.5 * s.gate_period_mv();
        let v = 1.0;
        let i = current(&s, &BiasPoint::new(mid, v));
        assert!(i.abs() <= v * s.g_off_us() * (1.0 + 1e-12));
        // open channel: I ≈ G_max · V for small V on a peak
        let i = current(&s, &BiasPoint::new(0.0, 0.1));
        assert!((i - 0.1 * s.g_max_us).abs() < 1e-9);
    }

    #[test]
    fn fwhm_scales_linearly_with_temperature() {
        let fwhm = |t: f64| {
            let s = SetSpec {
                t_e_k: t,
                ..SetSpec::default()
            };
            // bisection for G = G_max / 2 on the right flank of the peak
            let (mut a, mut b) = (0.0, 0.5 * s.gate_period_mv());
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if conductance(&s, &BiasPoint::new(m, 0.0)) > 0.5 * s.g_max_us {
                    a = m;
                } else {
                    b = m;
                }
            }
            2.0 * a
        };
        let temps = [0.1, 0.2, 0.3, 0.4, 0.6];
        let widths: Vec<f64> = temps.iter().map(|&t| fwhm(t)).collect();
        let n = temps.len() as f64;
        let (mx, my) = (temps.iter().sum::<f64>() / n, widths.iter().sum::<f64>() / n);
        let sxy: f64 = temps.iter().zip(&widths).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = temps.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let s = SetSpec::default();
        let expected = 2.5 * (1.0 + 2f64.sqrt()).ln() * 2.0 * KB_MEV_PER_K / s.lever_arm();
        assert!((slope - expected).abs() / expected < 0.05, "{slope} vs {expected}");
    }

    #[test]
    fn map_parallel_matches_serial() {
        let s = SetSpec::default();
        let gs: Vec<f64> = (0..21).map(|k| -10.0 + k as f64).collect();
        let ds: Vec<f64> = (0..11).map(|k| -5.0 + k as f64).collect();
        assert_eq!(stability_map(&s, &gs, &ds, true), stability_map(&s, &gs, &ds, false));
    }

    #[test]
    fn rejects_unblockaded_device() {
        let s = SetSpec {
            c_g_af: 1e5,
            ..SetSpec::default()
        };
        assert!(matches!(s.validate(), Err(SetError::NoBlockade { .. })));
    }

    proptest! {
        #[test]
        fn periodic_in_gate(v_gs in -60.0f64..60.0, v_ds in -8.0f64..8.0, n in -3i64..4) {
            let s = SetSpec::default();
            let g0 = conductance(&s, &BiasPoint::new(v_gs, v_ds));
            let g1 = conductance(&s, &BiasPoint::new(v_gs + n as f64 * s.gate_period_mv(), v_ds));
            prop_assert!((g0 - g1).abs() <= 1e-9 * s.g_max_us);
        }

        #[test]
        fn current_is_odd(v_gs in -30.0f64..30.0, v_ds in 0.0f64..6.0) {
            let s = SetSpec::default();
            let a = current(&s, &BiasPoint::new(v_gs, v_ds));
            let b = current(&s, &BiasPoint::new(v_gs, -v_ds));
            prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn conductance_bounded(v_gs in -60.0f64..60.0, v_ds in -10.0f64..10.0) {
            let s = SetSpec::default();
            let g = conductance(&s, &BiasPoint::new(v_gs, v_ds));
            prop_assert!(g >= s.g_off_us() && g <= s.g_max_us);
        }
    }
}
