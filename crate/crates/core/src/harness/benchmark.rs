//! End-to-end sensitivity benchmark: SET peak and background states read out through
//! the nonlinear resonator, synthetic IQ traces, boxcar ladder, blob fits, t_min per
//! power and the power-law regimes of t_min(P).

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{Axis, ExperimentConfig, SetState};
use super::output::{SweepResult, Table};
use super::recipes::{frequency_grid, linear_dip, power_spectrum, state_resistance};
use super::{provenance, Command, HarnessError};
use crate::consts::dbm_to_watts;
use crate::estimator::{fit_blob, fit_power_law, snr, tmin_extrapolate, PowerLawFit, SnrPoint, TminFit};
use crate::readout::{boxcar_downsample, randomize, synthesize_trace, ChainSpec};

/// One rung of the boxcar ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderPoint {
    pub w_bc: usize,
    pub point: SnrPoint,
    pub sigma_on: f64,
    pub sigma_off: f64,
}

/// Benchmark result at one drive power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    pub power_dbm: f64,
    /// Probe frequency maximising |S11(peak) − S11(blockade)|; NaN if no frequency
    /// kept both states superconducting.
    pub frequency_hz: f64,
    pub s11_on: Complex64,
    pub s11_off: Complex64,
    pub ladder: Vec<LadderPoint>,
    pub tmin: Option<TminFit>,
    pub status: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub powers: Vec<PowerOutcome>,
    pub power_law: PowerLawFit,
    pub split_dbm: f64,
}

fn best_frequency(cfg: &ExperimentConfig, power_dbm: f64) -> Result<(f64, Complex64, Complex64), HarnessError> {
    let b = &cfg.benchmark;
    let (r_on, r_off) = (
        state_resistance(cfg, SetState::Peak),
        state_resistance(cfg, SetState::Blockade),
    );
    let f0 = linear_dip(cfg, r_off)?;
    let freqs = frequency_grid(f0, b.f_rel_lo, b.f_rel_hi, b.n_frequencies, b.direction);
    let on = power_spectrum(cfg, &freqs, power_dbm, r_on);
    let off = power_spectrum(cfg, &freqs, power_dbm, r_off);
    let usable = |s: &&'static str| *s == "superconducting";
    let mut best: Option<(f64, usize)> = None;
    for k in 0..freqs.len() {
        if !(usable(&on.states[k]) && usable(&off.states[k])) {
            continue;
        }
        let d = (on.s11[k] - off.s11[k]).norm();
        if best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, k));
        }
    }
    Ok(match best {
        Some((_, k)) => (freqs[k], on.s11[k], off.s11[k]),
        None => {
            let nan = Complex64::new(f64::NAN, f64::NAN);
            (f64::NAN, nan, nan)
        }
    })
}

fn run_power(cfg: &ExperimentConfig, index: usize, power_dbm: f64) -> Result<PowerOutcome, HarnessError> {
    let b = &cfg.benchmark;
    let (frequency_hz, s11_on, s11_off) = best_frequency(cfg, power_dbm)?;
    let mut out = PowerOutcome {
        power_dbm,
        frequency_hz,
        s11_on,
        s11_off,
        ladder: Vec::new(),
        tmin: None,
        status: "ok",
    };
    if frequency_hz.is_nan() {
        out.status = "normal";
        return Ok(out);
    }
    let chain = ChainSpec {
        rng_seed: cfg.seed,
        ..cfg.chain.clone()
    };
    let trace = |s11: Complex64, stream: u64| {
        let c = chain.with_stream(stream);
        let mut t = synthesize_trace(&c, s11, power_dbm, b.n_samples)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if b.randomize {
            randomize(&mut t, c.rng_seed);
        }
        Ok::<_, HarnessError>(t)
    };
    let on = trace(s11_on, 2 * index as u64)?;
    let off = trace(s11_off, 2 * index as u64 + 1)?;
    for &w in &b.w_bc {
        let (on_w, off_w) = match (boxcar_downsample(&on, w), boxcar_downsample(&off, w)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Err(HarnessError::Config(e.to_string())),
        };
        let fits = (fit_blob(&on_w.samples), fit_blob(&off_w.samples));
        let (fon, foff) = match fits {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Err(HarnessError::Numerical(format!("blob fit at W_BC = {w}: {e}"))),
        };
        out.ladder.push(LadderPoint {
            w_bc: w,
            point: SnrPoint {
                t_int_s: on_w.t_int_per_sample_s,
                snr: snr(&fon, &foff),
            },
            sigma_on: fon.sigma(),
            sigma_off: foff.sigma(),
        });
    }
    let points: Vec<SnrPoint> = out.ladder.iter().map(|l| l.point).collect();
    match tmin_extrapolate(&points) {
        Ok(t) => out.tmin = Some(t),
        Err(_) => out.status = "no_tmin",
    }
    Ok(out)
}

/// Runs the benchmark at each power. Powers are independent and may run in parallel;
/// the noise streams depend only on the seed and the power's position in the list.
pub fn snr_benchmark(cfg: &ExperimentConfig, powers_dbm: &[f64], parallel: bool) -> Result<BenchmarkOutcome, HarnessError> {
    let powers: Vec<PowerOutcome> = if parallel {
        powers_dbm
            .par_iter()
            .enumerate()
            .map(|(k, &p)| run_power(cfg, k, p))
            .collect::<Result<_, _>>()?
    } else {
        powers_dbm
            .iter()
            .enumerate()
            .map(|(k, &p)| run_power(cfg, k, p))
            .collect::<Result<_, _>>()?
    };
    let pts: Vec<(f64, f64)> = powers
        .iter()
        .filter_map(|o| o.tmin.map(|t| (dbm_to_watts(o.power_dbm), t.t_min_s)))
        .collect();
    let split = cfg.benchmark.split_dbm;
    Ok(BenchmarkOutcome {
        power_law: fit_power_law(&pts, dbm_to_watts(split)),
        powers,
        split_dbm: split,
    })
}

/// Runs the benchmark recipe. An `rf_power` sweep replaces `benchmark.powers_dbm`; a
/// `W_BC` sweep replaces the boxcar ladder (values rounded to whole samples).
pub fn run_snr_benchmark(cfg: &ExperimentConfig, parallel: bool) -> Result<SweepResult, HarnessError> {
    let mut effective = cfg.clone();
    match cfg.sweep {
        Some(s) if s.axis == Axis::RfPower => effective.benchmark.powers_dbm = s.values(),
        Some(s) if s.axis == Axis::WBc => {
            let mut w: Vec<usize> = s.values().iter().map(|v| v.round() as usize).collect();
            w.sort_unstable();
            w.dedup();
            if w[0] == 0 || cfg.benchmark.n_samples < 16 * w[w.len() - 1] {
                return Err(HarnessError::Config(
                    "W_BC sweep needs windows >= 1 leaving at least 16 windows per trace".into(),
                ));
            }
            effective.benchmark.w_bc = w;
        }
        Some(s) => {
            return Err(HarnessError::Config(format!(
                "`snr-benchmark` sweeps rf_power or W_BC, but the config sweeps {}",
                s.axis
            )))
        }
        None => {}
    }
    let outcome = snr_benchmark(&effective, &effective.benchmark.powers_dbm, parallel)?;

    let mut snr_t = Table::new(
        "snr",
        &["power_dbm", "w_bc", "t_int_s", "snr", "sigma_on", "sigma_off"],
    );
    let mut summary = Table::new(
        "summary",
        &[
            "power_dbm",
            "frequency_hz",
            "s11_on_db",
            "s11_off_db",
            "delta_s11",
            "t_min_s",
            "slope",
            "t_min_stderr_s",
            "extrapolation_ratio",
            "status",
        ],
    );
    let nan = f64::NAN;
    for o in &outcome.powers {
        for l in &o.ladder {
            snr_t.push(vec![
                o.power_dbm.into(),
                l.w_bc.into(),
                l.point.t_int_s.into(),
                l.point.snr.into(),
                l.sigma_on.into(),
                l.sigma_off.into(),
            ]);
        }
        let t = o.tmin;
        summary.push(vec![
            o.power_dbm.into(),
            o.frequency_hz.into(),
            (20.0 * o.s11_on.norm().log10()).into(),
            (20.0 * o.s11_off.norm().log10()).into(),
            (o.s11_on - o.s11_off).norm().into(),
            t.map_or(nan, |t| t.t_min_s).into(),
            t.map_or(nan, |t| t.slope).into(),
            t.map_or(nan, |t| t.stderr_s).into(),
            t.map_or(nan, |t| t.extrapolation_ratio).into(),
            o.status.into(),
        ]);
    }
    let mut law = Table::new(
        "power_law",
        &["regime", "split_dbm", "exponent", "exponent_stderr", "n_points"],
    );
    for (name, side) in [("low", outcome.power_law.low), ("high", outcome.power_law.high)] {
        law.push(vec![
            name.into(),
            outcome.split_dbm.into(),
            side.map_or(nan, |l| l.slope).into(),
            side.map_or(nan, |l| l.var_slope.sqrt()).into(),
            side.map_or(0, |l| l.n).into(),
        ]);
    }
    let failure = outcome
        .powers
        .iter()
        .all(|o| o.tmin.is_none())
        .then(|| "no drive power yielded a t_min".to_string());
    Ok(SweepResult {
        provenance: provenance(Command::SnrBenchmark, cfg),
        tables: vec![summary, snr_t, law],
        failure,
    })
}
