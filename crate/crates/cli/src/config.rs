//! Merges a TOML config file under the command-line flags.
//!
//! Config keys are the long flag names (`date-format = "%d.%m.%Y"`). Keys at
//! the top level apply to every command; a `[analyze]`-style table applies
//! to that command only and wins over the top level. Flags given on the
//! command line win over both.

use std::path::Path;

use clap::CommandFactory;
use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::{Cli, Fail};

pub fn resolve<T: Serialize + DeserializeOwned>(
    flags: &T,
    config: Option<&Path>,
    command: &str,
) -> Result<T, Fail> {
    let mut merged = match config {
        Some(path) => file_table(path, command)?,
        None => Table::new(),
    };
    let given = Table::try_from(flags).map_err(|e| Fail::usage(format!("flags: {e}")))?;
    merged.extend(given);
    merged
        .try_into()
        .map_err(|e| Fail::usage(format!("invalid configuration: {e}")))
}

fn file_table(path: &Path, command: &str) -> Result<Table, Fail> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Fail::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut table: Table = text
        .parse()
        .map_err(|e| Fail::usage(format!("config {}: {e}", path.display())))?;

    let cli = Cli::command();
    let commands: Vec<String> = cli.get_subcommands().map(|c| c.get_name().to_owned()).collect();
    let known_anywhere = |key: &str| {
        cli.get_subcommands()
            .any(|c| c.get_arguments().any(|a| a.get_long() == Some(key)))
    };
    let this = cli.find_subcommand(command).expect("command exists");
    let known_here: Vec<&str> = this.get_arguments().filter_map(|a| a.get_long()).collect();

    let mut out = Table::new();
    for (key, value) in &table {
        if commands.contains(key) {
            continue;
        }
        if !known_anywhere(key) || key == "config" {
            return Err(Fail::usage(format!("config {}: unknown key `{key}`", path.display())));
        }
        if known_here.contains(&key.as_str()) {
            out.insert(key.clone(), value.clone());
        }
    }
    if let Some(section) = table.remove(command) {
        let Value::Table(section) = section else {
            return Err(Fail::usage(format!("config {}: `{command}` must be a table", path.display())));
        };
        for (key, value) in section {
            if !known_here.contains(&key.as_str()) || key == "config" {
                return Err(Fail::usage(format!(
                    "config {}: unknown key `{command}.{key}`",
                    path.display()
                )));
            }
            out.insert(key, value);
        }
    }
    Ok(out)
}

pub fn is_false(b: &bool) -> bool {
    !*b
}
