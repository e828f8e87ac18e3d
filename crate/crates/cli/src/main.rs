//! `chainbound` command-line front end.
//!
//! Exit status: 0 when every check passes, 1 when any inequality check
//! fails, 2 on usage, configuration or input errors.

mod commands;
mod config;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use thiserror::Error;

use config::{Cli, Command, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] chainbound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn dispatch(run: &RunConfig, command: &Command) -> Result<bool, CliError> {
    match command {
        Command::Cover(a) => commands::cover(run, a),
        Command::Entropy(a) => commands::entropy(run, a),
        Command::DiscreteCheck(a) => commands::discrete_check(run, a),
        Command::GaussCheck(a) => commands::gauss_check(run, a),
        Command::Dudley(a) => commands::dudley(run, a),
        Command::Regress(a) => commands::regress(run, a),
        Command::Maurey(a) => commands::maurey(run, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let outcome = config::resolve(cli).and_then(|(run, command)| {
        let verdict = dispatch(&run, &command);
        eprintln!("{}: {:.3} s", command.name(), start.elapsed().as_secs_f64());
        verdict
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
