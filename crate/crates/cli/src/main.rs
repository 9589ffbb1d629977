//! `isogauss`: runs one analysis, writes its CSV/JSON artifacts and a manifest
//! into the output directory, and exits 0 when every invariant holds, 2 when
//! one is violated and 1 on usage or input errors.

mod commands;
mod config;
mod io;

use std::process::ExitCode;

use clap::Parser;

use crate::config::{Cli, FileConfig};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or malformed input: exit 1.
    Usage(String),
    /// The input or the result violates a checked invariant: exit 2.
    Invariant(String),
}

impl From<isogauss::Error> for Failure {
    fn from(e: isogauss::Error) -> Self {
        use isogauss::Error::*;
        match e {
            Shape(_) | OracleLimit(_) | Backend(_) | Fit(_) => Failure::Usage(e.to_string()),
            _ => Failure::Invariant(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = FileConfig::load(cli.config.as_deref()).and_then(|cfg| commands::run(&cli, &cfg));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant violated: {msg}");
            ExitCode::from(2)
        }
    }
}
