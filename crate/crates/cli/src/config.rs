//! Flat `key = value` configuration files merged into the argument list.
//!
//! Each entry becomes `--key value` (or `--key` for a true boolean) appended
//! after the command-line arguments, unless that option, or one that
//! conflicts with it, was given on the command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};

use crate::error::CliError;

/// Parses the file; `#` starts a comment, keys may use `-` or `_`.
pub fn parse(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", lineno + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::usage(format!("config line {}: duplicate key {key}", lineno + 1)));
        }
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::usage(format!("config key {key}: {v} is not a boolean"))),
    }
}

/// Extra arguments for the subcommand `sub` of `root` from `entries`.
pub fn extra_args(
    root: &Command,
    sub: &str,
    matches: &ArgMatches,
    entries: &BTreeMap<String, String>,
) -> Result<Vec<OsString>, CliError> {
    let cmd = root.find_subcommand(sub).expect("parsed subcommand exists");
    let sub_matches = matches.subcommand_matches(sub).expect("parsed subcommand matches");
    let on_command_line = |id: &str| {
        sub_matches.try_contains_id(id).unwrap_or(false)
            && sub_matches.value_source(id) == Some(ValueSource::CommandLine)
    };
    let mut out = Vec::new();
    for (key, value) in entries {
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config" && key != "help" && key != "version")
            .ok_or_else(|| CliError::usage(format!("unknown config key: {key}")))?;
        let id = arg.get_id().as_str();
        if on_command_line(id) || cmd.get_arg_conflicts_with(arg).iter().any(|c| on_command_line(c.get_id().as_str())) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => {
                if parse_bool(key, value)? {
                    out.push(OsString::from(format!("--{key}")));
                }
            }
            _ => {
                out.push(OsString::from(format!("--{key}")));
                out.push(OsString::from(value));
            }
        }
    }
    Ok(out)
}
