#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod output;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use log::error;
use serde::Serialize;

use args::{Cli, Command};

/// Inconsistent or missing command-line arguments (exit status 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Missing or unreadable input (exit status 3).
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if cause.is::<DataError>() {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<toepnmf::Error>() {
            return match e.kind() {
                toepnmf::ErrorKind::Usage => EXIT_USAGE,
                toepnmf::ErrorKind::Data => EXIT_DATA,
                toepnmf::ErrorKind::Numerical => EXIT_NUMERICAL,
            };
        }
    }
    EXIT_DATA
}

/// Contents of `run.json`.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub threads: usize,
    pub config: serde_json::Value,
}

fn config_of(command: &Command) -> serde_json::Result<serde_json::Value> {
    match command {
        Command::Preprocess(a) => serde_json::to_value(a),
        Command::Factorize(a) => serde_json::to_value(a),
        Command::Sparsify(a) => serde_json::to_value(a),
        Command::Reconstruct(a) => serde_json::to_value(a),
        Command::Render(a) => serde_json::to_value(a),
        Command::Metrics(a) => serde_json::to_value(a),
        Command::TuneSigma(a) => serde_json::to_value(a),
        Command::Bench(a) => serde_json::to_value(a),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Usage("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let record = RunRecord {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name(),
        threads: rayon::current_num_threads(),
        config: config_of(&cli.command)?,
    };
    match &cli.command {
        Command::Preprocess(a) => commands::preprocess(a, &record),
        Command::Factorize(a) => commands::factorize(a, &record),
        Command::Sparsify(a) => commands::sparsify(a, &record),
        Command::Reconstruct(a) => commands::reconstruct(a, &record),
        Command::Render(a) => commands::render(a, &record),
        Command::Metrics(a) => commands::metrics(a, &record),
        Command::TuneSigma(a) => commands::tune_sigma(a, &record),
        Command::Bench(a) => commands::bench(a, &record),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
