//! `beatstream` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 non-finite loss during training.

mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use beatstream::framing::FrameMethod;
use beatstream::models::ModelKind;
use clap::{Parser, Subcommand};

use crate::config::Overrides;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "beatstream", version, about = "Two-stream ECG rhythm classification")]
struct Cli {
    /// JSON pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Framing method for the temporal stream.
    #[arg(long, global = true, value_parser = parse_method)]
    method: Option<FrameMethod>,
    #[arg(long, global = true, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Signal index to read from multi-lead records.
    #[arg(long, global = true)]
    lead: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesise a labelled dataset into the dataset directory.
    Generate,
    /// Denoise, detect R peaks and write the frames of every record.
    Preprocess,
    /// Train the selected model and write its checkpoint, history and split.
    Train,
    /// Score the selected model on the test split and write reports.
    Evaluate,
    /// Classify one record and print a JSON line.
    Predict {
        /// Record path, with or without the `.hea` extension.
        record: PathBuf,
    },
}

fn parse_method(s: &str) -> Result<FrameMethod, String> {
    s.parse()
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let overrides =
        Overrides { seed: cli.seed, method: cli.method, model: cli.model, lead: cli.lead };
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Generate => run::generate(&cfg),
        Command::Preprocess => run::preprocess(&cfg),
        Command::Train => run::train(&cfg),
        Command::Evaluate => run::evaluate(&cfg),
        Command::Predict { record } => run::predict(&cfg, &record),
    }
}
