//! Demodulated IQ readout: gain plus amplifier-referred white noise, and boxcar
//! downsampling.
//!
//! The signal for a reflection coefficient Γ at drive power P is
//! `gain·√(P·Z0)·Γ` volts, and each complex sample carries circular Gaussian noise
//! of variance `k_B·T_N·ENBW·gain²·Z0` (half per quadrature). Without a low-pass
//! filter the noise bandwidth is Nyquist, so `t_int = 1/(2·ENBW) = 1/sample_rate`.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consts::{dbm_to_watts, K_B};
use crate::rng::rng_for;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadoutError {
    #[error("invalid chain parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("trace must contain at least one sample")]
    EmptyTrace,
    #[error("boxcar window {window} exceeds trace length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("boxcar window must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    /// Net voltage gain, dB.
    pub system_gain_db: f64,
    /// Amplifier-referred noise temperature, K.
    pub noise_temperature_k: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Reference impedance of the detected voltage, Ω.
    #[serde(default = "default_z0")]
    pub z0_ohm: f64,
}

fn default_sample_rate() -> f64 {
    250e6
}

fn default_z0() -> f64 {
    50.0
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self {
            system_gain_db: 60.0,
            noise_temperature_k: 4.0,
            sample_rate_hz: default_sample_rate(),
            rng_seed: 0,
            z0_ohm: default_z0(),
        }
    }
}

impl ChainSpec {
    pub fn validate(&self) -> Result<(), ReadoutError> {
        let bad = |name, value: f64| Err(ReadoutError::InvalidParameter { name, value });
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz", self.sample_rate_hz);
        }
        if !(self.noise_temperature_k.is_finite() && self.noise_temperature_k >= 0.0) {
            return bad("noise_temperature_k", self.noise_temperature_k);
        }
        if !self.system_gain_db.is_finite() {
            return bad("system_gain_db", self.system_gain_db);
        }
        if !(self.z0_ohm.is_finite() && self.z0_ohm > 0.0) {
            return bad("z0_ohm", self.z0_ohm);
        }
        Ok(())
    }

    pub fn voltage_gain(&self) -> f64 {
        10f64.powf(self.system_gain_db / 20.0)
    }

    /// Noise bandwidth of the unfiltered chain: Nyquist with η = 1.
    pub fn enbw_hz(&self) -> f64 {
        enbw(self.sample_rate_hz / 2.0, 1.0, 1)
    }

    pub fn t_int_s(&self) -> f64 {
        t_int_from_enbw(self.enbw_hz())
    }

    /// Noiseless IQ point (V) for reflection `s11` at `drive_dbm`.
    pub fn signal(&self, s11: Complex64, drive_dbm: f64) -> Complex64 {
        s11 * (self.voltage_gain() * (dbm_to_watts(drive_dbm) * self.z0_ohm).sqrt())
    }

    /// Complex noise variance per sample, V².
    pub fn noise_variance(&self) -> f64 {
        K_B * self.noise_temperature_k * self.enbw_hz() * self.voltage_gain().powi(2) * self.z0_ohm
    }

    /// Copy of this chain with the seed replaced by an independent stream.
    pub fn with_stream(&self, stream: u64) -> Self {
        Self {
            rng_seed: crate::rng::mix_seed(self.rng_seed, stream),
            ..self.clone()
        }
    }
}

/// ENBW = η·f_LP / N_avg.
pub fn enbw(f_lp_hz: f64, eta: f64, n_avg: u32) -> f64 {
    eta * f_lp_hz / f64::from(n_avg)
}

pub fn t_int_from_enbw(enbw_hz: f64) -> f64 {
    1.0 / (2.0 * enbw_hz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqTrace {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    pub t_int_per_sample_s: f64,
}

impl IqTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Effective noise bandwidth of each sample, 1/(2·t_int).
    pub fn enbw_hz(&self) -> f64 {
        1.0 / (2.0 * self.t_int_per_sample_s)
    }

    pub fn mean(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() / self.samples.len() as f64
    }

    /// Writes `sample_index  I_V  Q_V` rows, tab separated.
    pub fn write_table<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "sample_index\tI_V\tQ_V")?;
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(w, "{k}\t{:.8e}\t{:.8e}", s.re, s.im)?;
        }
        Ok(())
    }
}

/// Sidecar description of a persisted trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub sample_rate_hz: f64,
    pub t_int_s: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub operating_point: String,
}

impl TraceMetadata {
    pub fn new(trace: &IqTrace, seed: u64, operating_point: impl Into<String>) -> Self {
        Self {
            sample_rate_hz: trace.sample_rate_hz,
            t_int_s: trace.t_int_per_sample_s,
            seed,
            n_samples: trace.len(),
            operating_point: operating_point.into(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metadata is plain data")
    }
}

/// Noisy trace of `n_samples` for reflection `s11` at `drive_dbm`. Deterministic in
/// `chain.rng_seed`.
pub fn synthesize_trace(
    chain: &ChainSpec,
    s11: Complex64,
    drive_dbm: f64,
    n_samples: usize,
) -> Result<IqTrace, ReadoutError> {
    chain.validate()?;
    if n_samples == 0 {
        return Err(ReadoutError::EmptyTrace);
    }
    let mean = chain.signal(s11, drive_dbm);
    let sigma = (chain.noise_variance() / 2.0).sqrt();
    let mut rng = rng_for(chain.rng_seed, 0);
    let samples = (0..n_samples)
        .map(|_| {
            let i: f64 = StandardNormal.sample(&mut rng);
            let q: f64 = StandardNormal.sample(&mut rng);
            mean + Complex64::new(sigma * i, sigma * q)
        })
        .collect();
    Ok(IqTrace {
        samples,
        sample_rate_hz: chain.sample_rate_hz,
        t_int_per_sample_s: chain.t_int_s(),
    })
}

/// Seeded in-place shuffle of the sample order, used to break slow drift
/// correlations before averaging.
pub fn randomize(trace: &mut IqTrace, seed: u64) {
    let mut rng = rng_for(seed, 1);
    trace.samples.shuffle(&mut rng);
}

/// Averages non-overlapping windows of `window` samples; a trailing partial
/// window is dropped.
pub fn boxcar_downsample(trace: &IqTrace, window: usize) -> Result<IqTrace, ReadoutError> {
    if window == 0 {
        return Err(ReadoutError::ZeroWindow);
    }
    if window > trace.len() {
        return Err(ReadoutError::WindowTooLarge {
            window,
            len: trace.len(),
        });
    }
    let scale = 1.0 / window as f64;
    let samples = trace
        .samples
        .chunks_exact(window)
        .map(|c| c.iter().sum::<Complex64>() * scale)
        .collect();
    Ok(IqTrace {
        samples,
        sample_rate_hz: trace.sample_rate_hz / window as f64,
        t_int_per_sample_s: trace.t_int_per_sample_s * window as f64,
    })
}
