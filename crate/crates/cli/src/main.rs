//! `capaf`: batch driver for the capillary Alexandrov-Fenchel verifier.
//!
//! Exit codes: 0 when every check passes, 2 on a tolerance breach, 3 on a
//! configuration error, 1 on any other failure (I/O, solver breakdown).

mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::config::{Cli, RunConfig};
use crate::error::CliError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_BREACH: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Caps the rayon pool when `CAPAF_THREADS` is set.
fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CAPAF_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "CAPAF_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    init_threads()?;
    let cfg = RunConfig::from_cli(&cli)?;
    let out = commands::run(&cfg, &cli.command)?;
    output::emit(&cfg, &out)?;
    Ok(out.report.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => {
            eprintln!("tolerance breach: see report");
            EXIT_BREACH
        }
        Err(e) => {
            eprintln!("capaf: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
