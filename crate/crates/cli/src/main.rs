mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable input or unwritable output (exit 1).
    Io(String),
    /// Bad flags, schema or data (exit 2).
    Invalid(String),
}

impl From<insident::Error> for Failure {
    fn from(e: insident::Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Summarize(a) => run::summarize(a),
        Command::Detect(a) => run::detect(a),
        Command::Evaluate(a) => run::evaluate(a),
        Command::Synth(a) => run::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
