// SPDX-License-Identifier: MIT OR Apache-2.0

//! `timeinf`: synthesize series, score time points, evaluate detections,
//! run pruning curves and plot the results.
//!
//! Exit status: 0 on success, 1 on numerical or internal failure, 2 on
//! usage or input errors. `TIMEINF_THREADS` caps worker threads.

mod commands;
mod error;
mod io;
mod manifest;
mod plot;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{DetectArgs, EvalArgs, PlotArgs, PruneArgs, SynthArgs};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "timeinf", version, about = "Time-point influence scores for autoregressive models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic series and its anomaly labels.
    Synth(SynthArgs),
    /// Score every time point and flag anomalies.
    Detect(DetectArgs),
    /// Print AUC / F1 of a scores file against labels.
    Eval(EvalArgs),
    /// Remove training blocks in influence order and record test metrics.
    Prune(PruneArgs),
    /// Render the series and score tracks as SVG.
    Plot(PlotArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("TIMEINF_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Input(format!("TIMEINF_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Output(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Detect(args) => commands::detect(args),
        Command::Eval(args) => commands::eval(args),
        Command::Prune(args) => commands::prune(args),
        Command::Plot(args) => commands::plot(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
