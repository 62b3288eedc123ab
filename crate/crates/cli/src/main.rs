//! `kiset`: runs one experiment recipe per invocation and writes its tables.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kiset_core::harness::config::FitSection;
use kiset_core::harness::{run, Command, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "kiset", version, about = "Kinetic-inductance rfSET readout simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; falls back to `output_path` in the config, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the config's `seed` (and so its hash).
    #[arg(long)]
    seed_override: Option<u64>,
    /// Spread independent sweep points over all cores. Output is identical either way.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args, Clone)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Tab-separated data file (overrides `fit.input`).
    #[arg(long)]
    input: Option<String>,
    /// eq1_temperature, eq2_current, resonance_lorentzian, powerlaw or constant.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated starting parameters.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    initial_guess: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Four-point I-V curves per temperature.
    Iv(Common),
    /// Linear reflection spectra, superconducting and normal.
    S11(Common),
    /// SET charge-stability map with the reflected signal.
    StabilityMap(Common),
    /// Sensitivity benchmark: SNR ladder, t_min per power, power-law regimes.
    SnrBenchmark(Common),
    /// Fit a built-in model to two table columns.
    Fit(FitArgs),
    /// Nonlinear operating point along one sweep axis.
    OpSweep(Common),
    /// Nonlinear resonance versus drive power.
    Resonance(Common),
}

impl Cmd {
    fn split(self) -> (Command, Common, Option<FitArgs>) {
        match self {
            Cmd::Iv(c) => (Command::Iv, c, None),
            Cmd::S11(c) => (Command::S11, c, None),
            Cmd::StabilityMap(c) => (Command::StabilityMap, c, None),
            Cmd::SnrBenchmark(c) => (Command::SnrBenchmark, c, None),
            Cmd::Fit(f) => (Command::Fit, f.common.clone(), Some(f)),
            Cmd::OpSweep(c) => (Command::OpSweep, c, None),
            Cmd::Resonance(c) => (Command::Resonance, c, None),
        }
    }
}

fn apply_fit_args(cfg: &mut ExperimentConfig, f: FitArgs) -> Result<(), HarnessError> {
    if f.input.is_none() && f.model.is_none() && f.initial_guess.is_none() {
        return Ok(());
    }
    let fit = match cfg.fit.take() {
        Some(fit) => fit,
        None => FitSection {
            input: f
                .input
                .clone()
                .ok_or_else(|| HarnessError::Config("fit needs --input or a [fit] table".into()))?,
            model: f
                .model
                .clone()
                .ok_or_else(|| HarnessError::Config("fit needs --model or a [fit] table".into()))?,
            initial_guess: f
                .initial_guess
                .clone()
                .ok_or_else(|| HarnessError::Config("fit needs --initial-guess or a [fit] table".into()))?,
            x_column: None,
            y_column: None,
            table: None,
            lower: None,
            upper: None,
        },
    };
    cfg.fit = Some(FitSection {
        input: f.input.unwrap_or(fit.input.clone()),
        model: f.model.unwrap_or(fit.model.clone()),
        initial_guess: f.initial_guess.unwrap_or(fit.initial_guess.clone()),
        ..fit
    });
    Ok(())
}

fn execute(cmd: Cmd) -> Result<Option<String>, HarnessError> {
    let (command, common, fit) = cmd.split();
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed_override {
        cfg.seed = seed;
    }
    if let Some(f) = fit {
        apply_fit_args(&mut cfg, f)?;
    }
    let result = run(command, &cfg, common.parallel)?;
    let text = result.render();
    match common.out.or_else(|| cfg.output_path.as_ref().map(PathBuf::from)) {
        Some(path) => {
            std::fs::write(&path, &text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?
        }
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| HarnessError::Io(e.to_string()))?,
    }
    Ok(result.failure)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(failure)) => {
            eprintln!("kiset: numerical failure: {failure}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("kiset: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
