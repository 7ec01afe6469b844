mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Simulate and analyse functional linear processes with space-varying memory.
#[derive(Debug, Parser)]
#[command(name = "varmem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write consecutive sample paths `X_1, …, X_n` to `paths.csv`.
    Simulate(CommonArgs),
    /// Write exact covariance tables, summability classes, L² report and the c(s,t) matrix.
    Analyze(CommonArgs),
    /// Run the Monte Carlo CLT check; the exit code is 1 when any verdict fails.
    VerifyClt(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, env = "VARMEM_CONFIG")]
    pub config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, env = "VARMEM_SEED")]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, env = "VARMEM_OUT", default_value = "varmem-out")]
    pub out: PathBuf,
    /// Worker thread cap; defaults to all cores.
    #[arg(long, env = "VARMEM_THREADS")]
    pub threads: Option<usize>,
    /// Relative tail-variance budget; overrides the config.
    #[arg(long = "tail-tol", env = "VARMEM_TAIL_TOL")]
    pub tail_tol: Option<f64>,
}

/// Outcome of a subcommand that ran to completion.
pub enum Outcome {
    Pass,
    VerdictFailure,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Analyze(a) => ("analyze", a),
        Command::VerifyClt(a) => ("verify-clt", a),
    };
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("error: cannot configure {k} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::VerifyClt(a) => commands::verify_clt(a),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::VerdictFailure) => {
            eprintln!("{name}: one or more verdicts failed");
            ExitCode::from(1)
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
