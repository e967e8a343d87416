#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use fdm_core::Execution;

use args::{Cli, Command};
use commands::Globals;
use error::CliError;

fn parse(argv: Vec<OsString>) -> Result<Cli, CliError> {
    let mut root = Cli::command();
    let first = match root.try_get_matches_from_mut(argv.clone()) {
        Ok(m) => m,
        Err(e) => {
            // --help and --version print and exit 0; the rest are usage errors
            let _ = e.print();
            std::process::exit(e.exit_code());
        }
    };
    let cli = Cli::from_arg_matches(&first).map_err(|e| CliError::usage(e.to_string()))?;
    let Some(path) = &cli.config else {
        return Ok(cli);
    };
    let entries = config::load(path)?;
    let (sub, _) = first.subcommand().expect("subcommand is required");
    root.build();
    let mut merged = argv;
    merged.extend(config::extra_args(&root, sub, &first, &entries)?);
    let matches = Cli::command().try_get_matches_from(merged).map_err(|e| CliError::usage(format!("config {}: {}", path.display(), e.kind())))?;
    Cli::from_arg_matches(&matches).map_err(|e| CliError::usage(e.to_string()))
}

fn run(argv: Vec<OsString>) -> Result<(), CliError> {
    let cli = parse(argv)?;
    let globals = Globals {
        reproducible: cli.reproducible,
        exec: if cli.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    match &cli.command {
        Command::Sample(a) => commands::sample(a, &globals),
        Command::Fdm(a) => commands::fdm(a, &globals),
        Command::Validate(a) => commands::validate(a, &globals),
        Command::Krr(a) => commands::krr(a, &globals),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
