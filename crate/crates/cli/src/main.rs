use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod manifest;
mod options;

use options::{BenchmarkOptions, GenerateOptions, RefineOptions, SolveOptions, StatsOptions};

/// Rotation averaging through iterated binary quadratic subproblems.
#[derive(Parser, Debug)]
#[command(name = "qmra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic camera graph with embedded ground truth
    Generate {
        /// TOML or JSON file with default values for the flags
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        opts: GenerateOptions,
    },
    /// Estimate absolute rotations for a graph file
    Solve {
        /// TOML or JSON file (or a previous run manifest)
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        opts: SolveOptions,
    },
    /// Sweep noise levels, seeds and methods on synthetic graphs
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        opts: BenchmarkOptions,
    },
    /// Measure posterior refinement over repeated sampling
    Refine {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        opts: RefineOptions,
    },
    /// Sparsity statistics of the first-iteration QUBO
    Stats {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        opts: StatsOptions,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate { config, opts } => commands::generate(opts, config.as_deref()),
        Command::Solve { config, opts } => commands::solve(opts, config.as_deref()),
        Command::Benchmark { config, opts } => commands::benchmark(opts, config.as_deref()),
        Command::Refine { config, opts } => commands::refine(opts, config.as_deref()),
        Command::Stats { config, opts } => commands::stats(opts, config.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmra: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
