//! `superrad`: command-line driver for the two-atom superradiance model.
//!
//! Every subcommand takes the same flat configuration, either from a JSON
//! file (`--config run.json`) or from `--key=value` flags, which win over
//! the file. Exit codes: 0 success, 1 I/O error, 2 configuration error,
//! 3 solver failure, 4 oracle mismatch.

// `!(v > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "superrad",
    version,
    about = "Superradiant burst of a dense two-level gas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one trajectory; writes trajectory.csv and summary.json.
    Simulate(RunArgs),
    /// Sweep the cooperativity over `c_values`; writes scan.csv and scan_fit.json.
    Scan(RunArgs),
    /// Rate spectrum and its chirp at (a0, x0); writes spectrum.csv.
    Spectrum(RunArgs),
    /// Compare the reduced equations against the full 4x4 master equation.
    OracleCheck(RunArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Flat JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Configuration overrides as `--key=value`, using the file's key names.
    #[arg(
        value_name = "--KEY=VALUE",
        trailing_var_arg = true,
        allow_hyphen_values = true
    )]
    overrides: Vec<String>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (command, args) = match cli.command {
        Command::Simulate(a) => (commands::simulate as fn(_) -> _, a),
        Command::Scan(a) => (commands::scan as fn(_) -> _, a),
        Command::Spectrum(a) => (commands::spectrum as fn(_) -> _, a),
        Command::OracleCheck(a) => (commands::oracle_check as fn(_) -> _, a),
    };
    let mut overrides = config::parse_overrides(&args.overrides).map_err(Failure::Config)?;
    // `--config` after the first override lands among the overrides
    let file = match overrides.remove("config") {
        Some(serde_json::Value::String(path)) if args.config.is_none() => Some(PathBuf::from(path)),
        Some(_) => {
            return Err(Failure::Config(
                "--config given more than once or not a path".into(),
            ))
        }
        None => args.config,
    };
    let config = config::load(file.as_deref(), overrides).map_err(Failure::Config)?;
    command(&config)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("superrad: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
