//! `sea`: scoring, verification, sweeps and benchmarks from the command line.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::HyperparamFlags;

#[derive(Debug, Parser)]
#[command(name = "sea", version, about = "Sketch abstraction-efficiency scoring")]
pub struct Cli {
    /// JSON run configuration (hyperparameters and provider endpoints).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "sea-out", value_name = "DIR")]
    pub out: PathBuf,
    /// Directory for cached provider responses.
    #[arg(long = "cache-dir", global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    #[command(flatten)]
    pub hp: HyperparamFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score annotated sketches.
    Score(commands::ScoreArgs),
    /// Check the analytical invariants over a grid.
    Verify(commands::VerifyArgs),
    /// Score curves over v at fixed P levels.
    Sweep(commands::SweepArgs),
    /// Hyperparameter ablation heatmaps.
    Heatmap(commands::HeatmapArgs),
    /// Category lift and global element frequency.
    Lift(commands::LiftArgs),
    /// Element-level VQA metrics, one row per prediction file.
    BenchVqa(commands::BenchVqaArgs),
    /// Agreement between two score files.
    Compare(commands::CompareArgs),
    /// Build a commonsense element database with a chat model.
    Extract(commands::ExtractArgs),
    /// Annotate element presence (and optionally P) with remote models.
    Annotate(commands::AnnotateArgs),
}

pub const EXIT_ERROR: u8 = 1;
pub const EXIT_VERIFY_FAILED: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(commands::Outcome::Ok) => ExitCode::SUCCESS,
        Ok(commands::Outcome::VerificationFailed) => ExitCode::from(EXIT_VERIFY_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
