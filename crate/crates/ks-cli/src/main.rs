//! `ks`: command-line driver for the Keller-Segel toolkit.
//!
//! One subcommand per experiment family:
//!
//! - `simulate` integrates the system with the IMEX pseudospectral solver;
//! - `picard` solves the Duhamel fixed point by iteration;
//! - `selfsim` sweeps radial self-similar profiles and locates the
//!   non-monotonicity threshold in the relaxation time;
//! - `eta` measures the bilinear estimate constant over a probe family;
//! - `validate` runs the acceptance suite and scans stored artifacts.
//!
//! Exit codes are a contract: 0 success, 1 configuration or validation
//! failure, 2 blowup suspected, 3 resolution lost, 4 Picard non-contraction.
//! Commands that write files also write a `manifest.toml` naming them.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod errors;
mod eta;
mod manifest;
mod output;
mod picard;
mod selfsim;
mod simulate;
mod validate;

use errors::CliError;

#[derive(Parser)]
#[command(name = "ks", version, about = "Keller-Segel simulation and estimate toolkit")]
struct Cli {
    /// Run configuration (TOML); read by `simulate` and `picard`.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides the config and the KS_OUT_DIR variable.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for the profile sweeps (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Single-threaded mode; repeat runs produce byte-identical outputs.
    #[arg(long, global = true)]
    strict_sequential: bool,

    /// Recorded in the manifest; the probe families are deterministic today.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the evolution equations from a TOML run configuration.
    Simulate,
    /// Solve the mild fixed point by Picard iteration.
    Picard,
    /// Self-similar profile sweeps: mass curves, trends, the tau* search.
    Selfsim(selfsim::SelfsimArgs),
    /// Empirical scan of the bilinear constant eta(tau).
    Eta(eta::EtaArgs),
    /// Run the acceptance suite and optionally scan stored snapshots.
    Validate(validate::ValidateArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    set_thread_count(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Simulate => simulate::run(&require_config(cli, "simulate")?, out, cli.seed),
        Command::Picard => picard::run(&require_config(cli, "picard")?, out, cli.seed),
        Command::Selfsim(args) => {
            reject_config(cli, "selfsim")?;
            selfsim::run(args, out, cli.seed)
        }
        Command::Eta(args) => {
            reject_config(cli, "eta")?;
            eta::run(args, out, cli.seed)
        }
        Command::Validate(args) => {
            reject_config(cli, "validate")?;
            validate::run(args)
        }
    }
}

fn set_thread_count(cli: &Cli) -> Result<(), CliError> {
    let n = if cli.strict_sequential {
        Some(1)
    } else {
        cli.threads
    };
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool setup failed: {e}")))
}

fn require_config(cli: &Cli, cmd: &str) -> Result<PathBuf, CliError> {
    cli.config
        .clone()
        .ok_or_else(|| CliError::Config(format!("{cmd} reads its setup from --config PATH")))
}

fn reject_config(cli: &Cli, cmd: &str) -> Result<(), CliError> {
    if cli.config.is_some() {
        return Err(CliError::Config(format!(
            "--config is only read by simulate and picard; {cmd} is flag-driven"
        )));
    }
    Ok(())
}
