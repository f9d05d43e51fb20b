mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "divband", version, about = "Optimal dividend bands for an insurance surplus with risky investment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the scale function W and write w.csv.
    SolveW {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Optimal single barrier; writes v1.csv.
    Barrier {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Band search with certification; writes v.csv and bands.json.
    Bands {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 2)]
        max_bands: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Certify a candidate written by `bands` or `barrier`.
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Band layout; defaults to bands.json next to the candidate.
        #[arg(long)]
        bands: Option<PathBuf>,
        /// Number of witnesses to print.
        #[arg(long, default_value_t = 20)]
        show: usize,
    },
    /// Monte Carlo value of the certified band strategy from `x0`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        x0: f64,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 2)]
        max_bands: usize,
    },
    /// Policy-iteration cross-check; writes oracle.csv.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Grid intervals (at most 2000).
        #[arg(long, default_value_t = 2000)]
        intervals: usize,
        /// Right end of the oracle grid; defaults to the configured x_max.
        #[arg(long)]
        span: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Full pipeline on a built-in reference model with figures and summary.json.
    Reproduce {
        #[arg(long, value_enum)]
        example: Example,
        #[arg(long)]
        outdir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    /// Exponential claims; a single barrier is optimal.
    #[value(name = "9.1")]
    Barrier,
    /// Uniform claims on [0.7, 1]; two bands are optimal.
    #[value(name = "9.2")]
    TwoBand,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::SolveW { config, out } => commands::solve_w(&config, &out),
        Command::Barrier { config, out } => commands::barrier(&config, &out),
        Command::Bands { config, max_bands, out } => commands::bands(&config, max_bands, &out),
        Command::Certify { config, candidate, bands, show } => {
            commands::certify(&config, &candidate, bands.as_deref(), show)
        }
        Command::Simulate { config, x0, paths, dt, tmax, seed, max_bands } => {
            commands::simulate(&config, x0, commands::SimOverrides { paths, dt, t_max: tmax, seed }, max_bands)
        }
        Command::Oracle { config, intervals, span, max_iter, tol, out } => {
            commands::oracle(&config, intervals, span, max_iter, tol, &out)
        }
        Command::Reproduce { example, outdir } => commands::reproduce(example, &outdir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
