//! `cdfsched`: command-line front end of the lab.
//!
//! Exit codes: 0 success, 1 validation or cross-check failure, 2 usage or
//! input error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cdfsched::validation::MIN_TRIALS;

#[derive(Debug, Parser)]
#[command(
    name = "cdfsched",
    version,
    about = "Random beamforming under CDF-based scheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario config (JSON).
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here (plus `<out>.manifest.json`) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Closed,
    Quadrature,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Individual sum rate of one user or all users.
    Rate {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "all")]
        user: Option<usize>,
        /// All users (the default).
        #[arg(long)]
        all: bool,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
    },
    /// Monte Carlo run of the scheduler.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
    },
    /// Level crossing, window and rate scaling over a K0 grid.
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        user: usize,
        /// `lo:hi:count` (log-spaced) or a comma-separated list, e.g.
        /// `1e3:1e9:7` or `100,1000`.
        #[arg(long, default_value = "1e3:1e9:7")]
        k0_grid: String,
        /// Monte Carlo trials for the in-window frequency (K0 <= 1e4).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        with_mc: Option<u64>,
    },
    /// Cross-validation suite; nonzero exit on any failed check.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(MIN_TRIALS..))]
        trials: u64,
        /// Negative control: scale every serving SNR on the analytic side.
        #[arg(long)]
        corrupt_rho: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rate {
            common,
            user,
            all: _,
            method,
        } => commands::rate(&common, user, method),
        Command::Simulate { common, trials } => commands::simulate(&common, trials),
        Command::Scaling {
            common,
            user,
            k0_grid,
            with_mc,
        } => commands::scaling(&common, user, &k0_grid, with_mc),
        Command::Validate {
            common,
            trials,
            corrupt_rho,
        } => commands::validate(&common, trials, corrupt_rho),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
