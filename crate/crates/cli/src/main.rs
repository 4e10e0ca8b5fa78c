//! `qplab` — command-line front end of the quasiperiodic-operator laboratory.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error (the message
//! names the offending key), 3 numerical-quality failure.

mod commands;
mod config;
mod csv;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CmdError;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "qplab", version, about = "Quasiperiodic operator laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band spectra over a rational frequency sweep.
    Butterfly(RunArgs),
    /// Complexified Lyapunov profiles ε ↦ L_ε per energy.
    Profile(RunArgs),
    /// Acceleration, T-acceleration and type-I verdicts per energy.
    Classify(RunArgs),
    /// Dual Lyapunov spectrum γ₁…γ_d with the simplicity gap.
    Dual(RunArgs),
    /// Truncation spectrum with labeled gaps.
    Spectrum(RunArgs),
    /// m-function, derivative-identity or reflectionless tables.
    Kotani(RunArgs),
    /// Small-divisor bound reports for the cohomological equation.
    Cohomology(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "qplab-out")]
    out: PathBuf,
    /// Worker threads; falls back to QPLAB_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Butterfly(a) => ("butterfly", a),
        Command::Profile(a) => ("profile", a),
        Command::Classify(a) => ("classify", a),
        Command::Dual(a) => ("dual", a),
        Command::Spectrum(a) => ("spectrum", a),
        Command::Kotani(a) => ("kotani", a),
        Command::Cohomology(a) => ("cohomology", a),
    };
    match run(name, args, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Io(e)) => {
            eprintln!("qplab: io error: {e}");
            ExitCode::from(1)
        }
        Err(CmdError::Config(msg)) => {
            eprintln!("qplab: configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CmdError::Numerical(msg)) => {
            eprintln!("qplab: numerical quality failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(name: &str, args: &RunArgs, command: &Command) -> Result<(), CmdError> {
    let text = fs::read_to_string(&args.config)?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CmdError::Config(format!("{}: {e}", args.config.display())))?;
    config::validate(&config).map_err(CmdError::Config)?;
    setup_threads(args.threads);

    fs::create_dir_all(&args.out)?;
    // Reproducibility echo: the fully resolved configuration and the
    // artifact version, next to the data.
    let echo = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "config": &config,
    });
    fs::write(
        args.out.join("resolved_config.json"),
        serde_json::to_string_pretty(&echo).expect("config echo serializes"),
    )?;

    match command {
        Command::Butterfly(_) => commands::run_butterfly(&config, &args.out),
        Command::Profile(_) => commands::run_profile(&config, &args.out),
        Command::Classify(_) => commands::run_classify(&config, &args.out),
        Command::Dual(_) => commands::run_dual(&config, &args.out),
        Command::Spectrum(_) => commands::run_spectrum(&config, &args.out),
        Command::Kotani(_) => commands::run_kotani(&config, &args.out),
        Command::Cohomology(_) => commands::run_cohomology(&config, &args.out),
    }
}

#[cfg(feature = "parallel")]
fn setup_threads(cli_threads: Option<usize>) {
    let from_env = std::env::var("QPLAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok());
    if let Some(k) = cli_threads.or(from_env) {
        if k > 0 {
            // A failure here means a pool already exists, which is fine.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global();
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn setup_threads(_cli_threads: Option<usize>) {}
