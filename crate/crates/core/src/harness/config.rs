//! Experiment configuration (TOML).
//!
//! Every table is optional and falls back to the defaults below; a present table
//! must be complete for the device specs (`film`, `resonator`, `set`) and may be
//! partial elsewhere. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::film::{FilmSpec, ThermalState};
use crate::readout::ChainSpec;
use crate::resonator::ResonatorSpec;
use crate::set_device::SetSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "temperature")]
    Temperature,
    #[serde(rename = "dc_current")]
    DcCurrent,
    #[serde(rename = "rf_power")]
    RfPower,
    #[serde(rename = "frequency")]
    Frequency,
    #[serde(rename = "V_GS")]
    VGs,
    #[serde(rename = "V_DS")]
    VDs,
    #[serde(rename = "W_BC")]
    WBc,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Temperature => "temperature",
            Axis::DcCurrent => "dc_current",
            Axis::RfPower => "rf_power",
            Axis::Frequency => "frequency",
            Axis::VGs => "V_GS",
            Axis::VDs => "V_DS",
            Axis::WBc => "W_BC",
        }
    }

    /// Column label including the unit.
    pub fn column(&self) -> &'static str {
        match self {
            Axis::Temperature => "temperature_k",
            Axis::DcCurrent => "i_dc_ua",
            Axis::RfPower => "power_dbm",
            Axis::Frequency => "frequency_hz",
            Axis::VGs => "v_gs_mv",
            Axis::VDs => "v_ds_mv",
            Axis::WBc => "w_bc",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl SweepSpec {
    pub fn linear(axis: Axis, start: f64, stop: f64, points: usize) -> Self {
        Self {
            axis,
            start,
            stop,
            points,
            scale: Scale::Linear,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.points < 2 {
            return Err(HarnessError::Config(format!(
                "sweep over {} needs at least 2 points, got {}",
                self.axis, self.points
            )));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(HarnessError::Config(format!("sweep over {} has non-finite limits", self.axis)));
        }
        if self.scale == Scale::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(HarnessError::Config(format!(
                "log sweep over {} needs positive limits",
                self.axis
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                match self.scale {
                    Scale::Linear => self.start + (self.stop - self.start) * t,
                    Scale::Log => {
                        let (a, b) = (self.start.ln(), self.stop.ln());
                        (a + (b - a) * t).exp()
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IvSection {
    /// Mixing-chamber temperatures, K.
    pub temperatures_k: Vec<f64>,
}

impl Default for IvSection {
    fn default() -> Self {
        Self {
            temperatures_k: vec![0.01, 0.5, 0.7, 0.9, 1.0, 1.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    pub v_ds_start_mv: f64,
    pub v_ds_stop_mv: f64,
    pub v_ds_points: usize,
    /// Probe frequency; defaults to the dip of the blockaded circuit.
    pub probe_frequency_hz: Option<f64>,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            v_ds_start_mv: -6.0,
            v_ds_stop_mv: 6.0,
            v_ds_points: 61,
            probe_frequency_hz: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    Up,
    #[default]
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSection {
    /// Drive powers at the resonator input, dBm; an `rf_power` sweep replaces them.
    pub powers_dbm: Vec<f64>,
    pub n_samples: usize,
    /// Boxcar windows; the default is 12 log-spaced values from 1 to 256.
    pub w_bc: Vec<usize>,
    /// Power (dBm) separating the linear and nonlinear regimes in the power-law fit.
    pub split_dbm: f64,
    /// Frequency search band relative to the linear dip of the blockaded circuit.
    pub f_rel_lo: f64,
    pub f_rel_hi: f64,
    pub n_frequencies: usize,
    pub direction: SweepDirection,
    /// Shuffle samples before boxcar averaging.
    pub randomize: bool,
}

/// `n` log-spaced integers from 1 to `max`, duplicates removed.
pub fn log_windows(n: usize, max: usize) -> Vec<usize> {
    let mut w: Vec<usize> = (0..n)
        .map(|k| (max as f64).powf(k as f64 / (n - 1) as f64).round() as usize)
        .collect();
    w.dedup();
    w
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            powers_dbm: vec![-116.0, -108.0, -100.0, -92.0, -78.0, -76.0, -73.0, -70.0],
            n_samples: 1 << 20,
            w_bc: log_windows(12, 256),
            split_dbm: -80.0,
            f_rel_lo: 0.94,
            f_rel_hi: 1.03,
            n_frequencies: 361,
            direction: SweepDirection::Down,
            randomize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearSection {
    /// Frequency band relative to the linear dip.
    pub f_rel_lo: f64,
    pub f_rel_hi: f64,
    pub n_frequencies: usize,
    pub direction: SweepDirection,
    /// SET state loading the resonator: "blockade" or "peak".
    pub set_state: SetState,
}

impl Default for NonlinearSection {
    fn default() -> Self {
        Self {
            f_rel_lo: 0.9,
            f_rel_hi: 1.05,
            n_frequencies: 601,
            direction: SweepDirection::Down,
            set_state: SetState::Blockade,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetState {
    Peak,
    #[default]
    Blockade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatingSection {
    pub frequency_hz: Option<f64>,
    pub power_dbm: f64,
    pub i_dc_ua: f64,
    pub set_state: SetState,
}

impl Default for OperatingSection {
    fn default() -> Self {
        Self {
            frequency_hz: None,
            power_dbm: -110.0,
            i_dc_ua: 0.0,
            set_state: SetState::Blockade,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Tab-separated input; `#` lines are ignored.
    pub input: String,
    pub model: String,
    pub initial_guess: Vec<f64>,
    /// Column names; default to the first two columns.
    #[serde(default)]
    pub x_column: Option<String>,
    #[serde(default)]
    pub y_column: Option<String>,
    /// Table to read when the input holds several `# table:` sections.
    #[serde(default)]
    pub table: Option<String>,
    #[serde(default)]
    pub lower: Option<Vec<f64>>,
    #[serde(default)]
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub output_path: Option<String>,
    pub film: FilmSpec,
    pub thermal: ThermalState,
    pub resonator: ResonatorSpec,
    pub set: SetSpec,
    pub chain: ChainSpec,
    pub sweep: Option<SweepSpec>,
    pub iv: IvSection,
    pub stability: StabilitySection,
    pub benchmark: BenchmarkSection,
    pub nonlinear: NonlinearSection,
    pub operating: OperatingSection,
    pub fit: Option<FitSection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_path: None,
            film: FilmSpec::type_b(),
            thermal: ThermalState::at_base(0.01),
            resonator: ResonatorSpec::integrated(),
            set: SetSpec::default(),
            chain: ChainSpec::default(),
            sweep: None,
            iv: IvSection::default(),
            stability: StabilitySection::default(),
            benchmark: BenchmarkSection::default(),
            nonlinear: NonlinearSection::default(),
            operating: OperatingSection::default(),
            fit: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical serialization; the provenance hash is taken over this text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |e: &dyn fmt::Display| HarnessError::Config(e.to_string());
        self.film.validate().map_err(|e| cfg(&e))?;
        self.resonator.validate().map_err(|e| cfg(&e))?;
        self.set.validate().map_err(|e| cfg(&e))?;
        self.chain.validate().map_err(|e| cfg(&e))?;
        if !(self.thermal.t_mxc_k >= 0.0 && self.thermal.t_el_k > 0.0) {
            return Err(HarnessError::Config("thermal temperatures must be non-negative (t_el positive)".into()));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        if self.chain.rng_seed != 0 {
            return Err(HarnessError::Config(
                "chain.rng_seed is derived from the top-level seed; set `seed` instead".into(),
            ));
        }
        if self.stability.v_ds_points < 1 {
            return Err(HarnessError::Config("stability.v_ds_points must be at least 1".into()));
        }
        let b = &self.benchmark;
        if b.powers_dbm.is_empty() || b.powers_dbm.iter().any(|p| p.is_nan() || *p == f64::INFINITY) {
            return Err(HarnessError::Config("benchmark.powers_dbm must hold finite powers or -inf".into()));
        }
        if b.w_bc.is_empty() || b.w_bc.contains(&0) {
            return Err(HarnessError::Config("benchmark.w_bc must hold positive windows".into()));
        }
        if b.n_samples < 16 * b.w_bc.iter().max().copied().unwrap_or(1) {
            return Err(HarnessError::Config(
                "benchmark.n_samples must leave at least 16 windows at the largest W_BC".into(),
            ));
        }
        for (lo, hi, n, what) in [
            (b.f_rel_lo, b.f_rel_hi, b.n_frequencies, "benchmark"),
            (
                self.nonlinear.f_rel_lo,
                self.nonlinear.f_rel_hi,
                self.nonlinear.n_frequencies,
                "nonlinear",
            ),
        ] {
            if !(lo > 0.0 && hi > lo) || n < 3 {
                return Err(HarnessError::Config(format!(
                    "{what} frequency band needs 0 < f_rel_lo < f_rel_hi and at least 3 points"
                )));
            }
        }
        Ok(())
    }

    /// The configured sweep if it runs over `axis`, else `default`; a sweep over a
    /// different axis is a configuration error.
    pub fn sweep_or(&self, axis: Axis, default: SweepSpec, command: &str) -> Result<SweepSpec, HarnessError> {
        match self.sweep {
            Some(s) if s.axis == axis => Ok(s),
            Some(s) => Err(HarnessError::Config(format!(
                "`{command}` sweeps {axis}, but the config sweeps {}",
                s.axis
            ))),
            None => Ok(default),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn round_trip_preserves_hash() {
        let mut c = ExperimentConfig::default();
        c.sweep = Some(SweepSpec::linear(Axis::RfPower, -120.0, -70.0, 8));
        c.fit = Some(FitSection {
            input: "x.tsv".into(),
            model: "eq1_temperature".into(),
            initial_guess: vec![1.0, 2.0, 3.0],
            x_column: None,
            y_column: None,
            table: None,
            lower: None,
            upper: None,
        });
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.sha256(), c.sha256());
        let mut d = c.clone();
        d.seed = 1;
        assert_ne!(d.sha256(), c.sha256());
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "bogus = 1",
            "[sweep]\naxis = \"voltage\"\nstart = 0.0\nstop = 1.0\npoints = 3",
            "[sweep]\naxis = \"V_GS\"\nstart = 0.0\nstop = 1.0\npoints = 1",
            "[sweep]\naxis = \"rf_power\"\nstart = 0.0\nstop = 1.0\npoints = 3\nscale = \"log\"",
            "[set]\nc_g_af = -1.0\nc_s_af = 1.0\nc_d_af = 1.0\ng_max_us = 1.0\nt_e_k = 0.1",
            "[benchmark]\nw_bc = [0]",
        ] {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(HarnessError::Config(_))), "{text}");
        }
    }

    #[test]
    fn sweep_values() {
        let s = SweepSpec {
            axis: Axis::WBc,
            start: 1.0,
            stop: 100.0,
            points: 3,
            scale: Scale::Log,
        };
        let v = s.values();
        assert!((v[1] - 10.0).abs() < 1e-12 && v[0] == 1.0 && (v[2] - 100.0).abs() < 1e-12);
        assert_eq!(log_windows(12, 256), vec![1, 2, 3, 5, 8, 12, 21, 34, 56, 93, 155, 256]);
    }
}
