//! `freeclt`: transforms of free central-limit sums and their semicircular
//! limits, convergence-rate sweeps, spectral density recovery, linearization
//! checks, and a random-matrix Monte Carlo oracle.
//!
//! Exit codes: 0 success, 1 configuration/validation error, 2 numerical
//! non-convergence, 3 property-assertion failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{
    cmd_check_linearization, cmd_clt_rate, cmd_density, cmd_mc, cmd_poly, cmd_solve, CmdError,
};

#[derive(Parser)]
#[command(name = "freeclt", version, about = "Free central-limit transform toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV/JSON results.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Seed override for randomized computations.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sweeps (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Print progress diagnostics to standard error.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the semicircular fixed-point equation at one argument.
    Solve,
    /// Sweep transform differences of partial sums against the limit.
    CltRate,
    /// Polynomial transform differences through the linearization pencil.
    Poly,
    /// Recover a spectral density and CDF by boundary evaluation.
    Density,
    /// Validate a linearization pencil on random matrix substitutions.
    CheckLinearization,
    /// Monte Carlo resolvent estimate from random matrix models.
    Mc,
}

fn main() {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("error: cannot configure worker pool: {e}");
            std::process::exit(1);
        }
    }
    let config = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config <path> is required");
            std::process::exit(1);
        }
    };
    let result = match cli.command {
        Command::Solve => cmd_solve(&config, &cli.out, cli.verbose),
        Command::CltRate => cmd_clt_rate(&config, &cli.out, cli.seed, cli.verbose),
        Command::Poly => cmd_poly(&config, &cli.out, cli.verbose),
        Command::Density => cmd_density(&config, &cli.out, cli.verbose),
        Command::CheckLinearization => cmd_check_linearization(&config, &cli.out, cli.verbose),
        Command::Mc => cmd_mc(&config, &cli.out, cli.seed, cli.verbose),
    };
    match result {
        Ok(()) => {}
        Err(e @ CmdError::Config(_)) => {
            eprintln!("configuration error: {}", e.message());
            std::process::exit(e.exit_code());
        }
        Err(e @ CmdError::Numerical(_)) => {
            eprintln!("numerical error: {}", e.message());
            std::process::exit(e.exit_code());
        }
        Err(e @ CmdError::Assertion(_)) => {
            eprintln!("assertion failure: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
