//! `lapcli`: numerical experiments for the limiting absorption principle.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{write_summary, write_table, Summary};

#[derive(Parser)]
#[command(name = "lapcli", version, about = "Limiting absorption experiments on a periodic grid")]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the family seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving the CSV tables and JSON summary.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Sets a configuration field, e.g. `--set grid.points=128`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Norm table and embedding ratios.
    Norms,
    /// Boundary values of the resolvent on the test family.
    Resolvent,
    /// Pointwise decay of the boundary kernel.
    Kernel,
    /// Uniformity sweep over spectral parameters and ε.
    Sweep,
    /// Eigenvalue scan of the perturbed operator.
    Spectrum,
    /// Admissibility checks of the potential.
    Potential,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Norms => "norms",
            Command::Resolvent => "resolvent",
            Command::Kernel => "kernel",
            Command::Sweep => "sweep",
            Command::Spectrum => "spectrum",
            Command::Potential => "potential",
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Some(serde_json::from_str::<Value>(&text).map_err(|e| CliError::Validation(format!("config: {e}")))?)
        }
        None => None,
    };
    let mut cfg = config::resolve(file.as_ref(), &cli.sets)?;
    if let Some(seed) = cli.seed {
        cfg.family.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_workers() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("LAPCLI_WORKERS") {
        let n: usize = raw
            .parse()
            .map_err(|_| CliError::Validation(format!("LAPCLI_WORKERS: expected a positive integer, got '{raw}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("LAPCLI_WORKERS: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli, start: Instant) -> Result<i32, CliError> {
    init_workers()?;
    let cfg = load(cli)?;
    let outcome = match cli.command {
        Command::Norms => commands::norms(&cfg),
        Command::Resolvent => commands::resolvent(&cfg),
        Command::Kernel => commands::kernel(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Spectrum => commands::spectrum(&cfg),
        Command::Potential => commands::potential(&cfg),
    }?;
    std::fs::create_dir_all(&cli.out_dir)?;
    for t in &outcome.tables {
        write_table(&cli.out_dir, t)?;
    }
    let code = outcome.status.exit_code();
    let status = outcome.status.label();
    let summary = Summary {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        family_version: lap_core::family::FAMILY_VERSION,
        config: &cfg,
        results: outcome.results,
        status: &status,
        exit_code: code,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    write_summary(&cli.out_dir, &summary)?;
    println!("{}: {}", cli.command.name(), summary.status);
    Ok(code)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = Cli::parse();
    match run(&cli, start) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
