//! `trendfuse` — config-driven backtest harness for news-technical fusion
//! trend prediction.
//!
//! Exit codes: 0 success, 2 config error (including usage errors), 3 data
//! error, 4 pipeline error, 5 evaluation error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{ArgAction, Parser, Subcommand};

use config::{BackendKind, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "trendfuse",
    version,
    about = "Cryptocurrency trend prediction backtester fusing news sentiment with technical indicators"
)]
struct Cli {
    /// Path to the TOML run configuration
    #[arg(short, long, global = true, default_value = "trendfuse.toml")]
    config: PathBuf,

    /// Override the configured output directory
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Override the scoring backend
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,

    /// Override the mock backend seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate candle and corpus files and print summaries
    Ingest,
    /// Run the prediction pipeline; writes predictions.jsonl and stats.json
    Predict,
    /// Score prediction files against candle-derived labels; writes reports
    /// and, with a baseline file, comparison tables
    Evaluate {
        /// Predictions from the multi-dimensional system
        #[arg(long)]
        predictions: PathBuf,
        /// Baseline predictions for the side-by-side comparison
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Print the evaluation table to stdout without writing files
    Report {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Print the compiled-in keyword lexicon, one JSON record per category
    DumpLexicon,
}

/// Errors tagged with their exit-code class.
pub enum AppError {
    Config(anyhow::Error),
    Data(anyhow::Error),
    Pipeline(anyhow::Error),
    Evaluation(anyhow::Error),
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Data(_) => 3,
            AppError::Pipeline(_) => 4,
            AppError::Evaluation(_) => 5,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(e) => write!(f, "config error: {e:#}"),
            AppError::Data(e) => write!(f, "data error: {e:#}"),
            AppError::Pipeline(e) => write!(f, "pipeline error: {e:#}"),
            AppError::Evaluation(e) => write!(f, "evaluation error: {e:#}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    if matches!(cli.command, Command::DumpLexicon) {
        return commands::dump_lexicon();
    }
    let overrides = Overrides {
        output_dir: cli.output_dir.clone(),
        backend: cli.backend,
        seed: cli.seed,
    };
    let config = RunConfig::load(&cli.config, &overrides).map_err(AppError::Config)?;
    match &cli.command {
        Command::Ingest => commands::ingest(&config),
        Command::Predict => commands::predict(&config),
        Command::Evaluate { predictions, baseline } => {
            commands::evaluate(&config, predictions, baseline.as_deref())
        }
        Command::Report { predictions, baseline } => {
            commands::report(&config, predictions, baseline.as_deref())
        }
        Command::DumpLexicon => unreachable!("handled above"),
    }
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::from_default_env().filter_level(level).init();

    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
