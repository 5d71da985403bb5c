//! `anticipate` — operator entry point for the anticipatory dialogue engine.
//!
//! Exit codes: 0 success, 1 runtime/I/O failure, 2 usage error.

mod commands;
mod interactive;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anticipate", version, about = "Anticipatory dialogue engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; drawn from entropy (and printed) when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the stdout summary.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run closed-loop sessions against the simulated user.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1)]
        sessions: usize,
        #[arg(long, default_value_t = 100)]
        turns: usize,
        /// Output directory for session logs and the aggregate report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-train the emotion predictor from an annotated corpus.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: u32,
        /// Model output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Analyze a corpus: phase PCCs, DA shifts, prediction metrics.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        corpus: PathBuf,
        /// Report output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit simulated-user mimicry weights to PCC targets.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Targets as inline JSON or a path to a JSON file.
        #[arg(long)]
        targets: String,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        /// Config output file with the fitted user model.
        #[arg(long)]
        out: PathBuf,
    },
    /// Play the user against the engine, one turn at a time.
    Interactive {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Log level from ANTICIPATE_LOG (error|info|debug), diagnostics on stderr.
pub(crate) fn log_enabled(level: &str) -> bool {
    let configured = std::env::var("ANTICIPATE_LOG").unwrap_or_else(|_| "error".into());
    let rank = |l: &str| match l {
        "debug" => 2,
        "info" => 1,
        _ => 0,
    };
    rank(level) <= rank(&configured)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common, sessions, turns, out } => {
            commands::simulate(&common, sessions, turns, &out)
        }
        Command::Train { common, corpus, epochs, out } => {
            commands::train(&common, &corpus, epochs, &out)
        }
        Command::Analyze { common, corpus, out } => commands::analyze(&common, &corpus, &out),
        Command::Calibrate { common, targets, trials, out } => {
            commands::calibrate(&common, &targets, trials, &out)
        }
        Command::Interactive { common } => interactive::run(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Error with its process exit code: 1 runtime/I/O, 2 usage.
pub(crate) struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<anticipate_core::Error> for CliError {
    fn from(e: anticipate_core::Error) -> Self {
        use anticipate_core::Error::*;
        match e {
            Io(_) | Json(_) => CliError::runtime(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

pub(crate) type CliResult = Result<(), CliError>;
