//! Configuration, experiment recipes and tabular output behind the `kiset` CLI.
//!
//! Each [`Command`] maps to one `run_*` recipe that turns an [`ExperimentConfig`] into a
//! [`SweepResult`]: a set of named tables plus a provenance block carrying the SHA-256
//! of the effective configuration. Recipes are deterministic in the configured seed,
//! whether or not they run in parallel.

mod benchmark;
pub mod config;
pub mod output;
mod recipes;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use benchmark::{run_snr_benchmark, snr_benchmark, BenchmarkOutcome, PowerOutcome};
pub use config::{Axis, ExperimentConfig, Scale, SetState, SweepDirection, SweepSpec};
pub use output::{parse_output, Cell, Provenance, SweepResult, Table, VERSION};
pub use recipes::{
    run_fit, run_iv, run_op_sweep, run_resonance_vs_power, run_s11, run_stability_map,
    set_resistances_ohm,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit code: 2 configuration, 3 numerical, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Iv,
    S11,
    StabilityMap,
    SnrBenchmark,
    Fit,
    OpSweep,
    Resonance,
}

pub const ALL_COMMANDS: [Command; 7] = [
    Command::Iv,
    Command::S11,
    Command::StabilityMap,
    Command::SnrBenchmark,
    Command::Fit,
    Command::OpSweep,
    Command::Resonance,
];

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Iv => "iv",
            Command::S11 => "s11",
            Command::StabilityMap => "stability-map",
            Command::SnrBenchmark => "snr-benchmark",
            Command::Fit => "fit",
            Command::OpSweep => "op-sweep",
            Command::Resonance => "resonance",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_COMMANDS
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown command `{s}`")))
    }
}

/// Runs `command` on a validated config.
pub fn run(command: Command, cfg: &ExperimentConfig, parallel: bool) -> Result<SweepResult, HarnessError> {
    cfg.validate()?;
    match command {
        Command::Iv => run_iv(cfg, parallel),
        Command::S11 => run_s11(cfg),
        Command::StabilityMap => run_stability_map(cfg, parallel),
        Command::SnrBenchmark => run_snr_benchmark(cfg, parallel),
        Command::Fit => run_fit(cfg),
        Command::OpSweep => run_op_sweep(cfg),
        Command::Resonance => run_resonance_vs_power(cfg, parallel),
    }
}

/// Recomputes the config hash and compares it with the one embedded in `rendered`.
pub fn verify_provenance(rendered: &str, cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let (prov, _) = parse_output(rendered)?;
    let prov = prov.ok_or_else(|| HarnessError::Config("output has no provenance preamble".into()))?;
    let expected = cfg.sha256();
    if prov.config_sha256 != expected {
        return Err(HarnessError::Config(format!(
            "config hash mismatch: output {} vs config {}",
            prov.config_sha256, expected
        )));
    }
    if prov.seed != cfg.seed {
        return Err(HarnessError::Config(format!(
            "seed mismatch: output {} vs config {}",
            prov.seed, cfg.seed
        )));
    }
    Ok(())
}

pub(crate) fn provenance(command: Command, cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        version: VERSION.to_string(),
        command: command.name().to_string(),
        config_sha256: cfg.sha256(),
        seed: cfg.seed,
    }
}
