//! Batch front end for the pulsed optomechanics suite: config-driven runs
//! with deterministic seeding and CSV/JSON outputs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl From<pomsim::Error> for CliError {
    fn from(err: pomsim::Error) -> Self {
        match err {
            pomsim::Error::Config(_)
            | pomsim::Error::InvalidParameter { .. }
            | pomsim::Error::InsufficientAngles { .. } => CliError::Config(err.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pomsim",
    version,
    about = "Pulsed optomechanical measurement simulations: pulse shaping, tomography, purification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drive envelope, cavity response and derived measurement parameters.
    Pulse(RunArgs),
    /// Homodyne data sets, deconvolution and state reconstruction.
    Tomography(RunArgs),
    /// Two-pulse purification or a general pulse sequence.
    Purify(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing). Env: POMSIM_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed overriding the config. Env: POMSIM_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for angle sweeps. Env: POMSIM_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn out_dir(&self) -> Result<PathBuf, CliError> {
        self.out
            .clone()
            .or_else(|| std::env::var("POMSIM_OUT").ok().map(PathBuf::from))
            .ok_or_else(|| CliError::Config("missing --out (or POMSIM_OUT)".into()))
    }

    fn seed(&self, config_seed: Option<u64>) -> u64 {
        self.seed
            .or_else(|| {
                std::env::var("POMSIM_SEED")
                    .ok()
                    .and_then(|s| s.parse().ok())
            })
            .or(config_seed)
            .unwrap_or(0)
    }

    fn threads(&self) -> usize {
        self.threads
            .or_else(|| {
                std::env::var("POMSIM_THREADS")
                    .ok()
                    .and_then(|s| s.parse().ok())
            })
            .unwrap_or(1)
            .max(1)
    }

    fn read_config(&self) -> Result<String, CliError> {
        std::fs::read_to_string(&self.config)
            .map_err(|e| CliError::Config(format!("read {}: {e}", self.config.display())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Pulse(args) => run_pulse(args),
        Command::Tomography(args) => run_tomography(args),
        Command::Purify(args) => run_purify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn prepare(args: &RunArgs, command: &str, seed: u64) -> Result<PathBuf, CliError> {
    let out_dir = args.out_dir()?;
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("create {}: {e}", out_dir.display())))?;
    output::RunManifest::new(command, &args.config, seed, &out_dir).write(&out_dir)?;
    Ok(out_dir)
}

fn run_pulse(args: &RunArgs) -> Result<(), CliError> {
    let cfg: config::PulseConfig = config::parse(&args.read_config()?, "pulse-config v1")?;
    let seed = args.seed(None);
    let out_dir = prepare(args, "pulse", seed)?;
    commands::pulse::run(&cfg, &out_dir)
}

fn run_tomography(args: &RunArgs) -> Result<(), CliError> {
    let cfg: config::TomographyConfig =
        config::parse(&args.read_config()?, "tomography-config v1")?;
    let seed = args.seed(cfg.master_seed);
    let out_dir = prepare(args, "tomography", seed)?;
    commands::tomography::run(&cfg, &out_dir, seed, args.threads())
}

fn run_purify(args: &RunArgs) -> Result<(), CliError> {
    let cfg: config::ProtocolConfig = config::parse(&args.read_config()?, "protocol-config v1")?;
    let seed = args.seed(cfg.sequence.as_ref().map(|s| s.master_seed));
    let out_dir = prepare(args, "purify", seed)?;
    commands::purify::run(&cfg, &out_dir, seed)
}
