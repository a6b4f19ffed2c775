//! Default flag values from a JSON config file.
//!
//! Top-level scalars set global flags (`{"seed": 7}`); an object keyed by a
//! subcommand name sets that subcommand's flags (`{"clean": {"folds": 3}}`).
//! Keys use the flag name with `_` or `-`. Booleans toggle switches, arrays
//! repeat the flag. A flag given on the command line wins over the file.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use clap::Command;
use serde_json::{Map, Value};

const GLOBAL_VALUE_FLAGS: [&str; 3] = ["--seed", "--config", "--log-level"];

fn config_path(argv: &[String]) -> Option<String> {
    let mut iter = argv.iter().skip(1);
    let mut found = None;
    while let Some(arg) = iter.next() {
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            found = iter.next().cloned();
        } else if let Some(v) = arg.strip_prefix("--config=") {
            found = Some(v.to_string());
        }
    }
    found
}

/// Position of the subcommand token, skipping global flags and their values.
fn subcommand_position(argv: &[String], command: &Command) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].as_str();
        if GLOBAL_VALUE_FLAGS.contains(&arg) {
            i += 2;
            continue;
        }
        if arg.starts_with('-') {
            i += 1;
            continue;
        }
        return command.find_subcommand(arg).map(|_| i);
    }
    None
}

fn given_explicitly(argv: &[String], flag: &str) -> bool {
    argv.iter()
        .any(|a| a == flag || a.strip_prefix(flag).is_some_and(|rest| rest.starts_with('=')))
}

fn flag_tokens(table: &Map<String, Value>, argv: &[String], skip_objects: bool) -> anyhow::Result<Vec<String>> {
    let mut tokens = Vec::new();
    for (key, value) in table {
        if skip_objects && value.is_object() {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || given_explicitly(argv, &flag) {
            continue;
        }
        let scalar = |v: &Value| -> anyhow::Result<String> {
            Ok(match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                other => bail!("config key `{key}` has unsupported value {other}"),
            })
        };
        match value {
            Value::Bool(true) => tokens.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                for item in items {
                    tokens.push(flag.clone());
                    tokens.push(scalar(item)?);
                }
            }
            other => {
                tokens.push(flag);
                tokens.push(scalar(other)?);
            }
        }
    }
    Ok(tokens)
}

/// Returns `argv` with config defaults inserted ahead of the explicit flags.
pub fn apply_config(argv: Vec<String>, command: &Command) -> anyhow::Result<Vec<String>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let content = fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let Value::Object(table) = serde_json::from_str(&content).with_context(|| format!("parsing config {path}"))? else {
        bail!("config {path} must hold a JSON object");
    };
    for (key, value) in &table {
        if value.is_object() && command.find_subcommand(key).is_none() {
            bail!("config {path}: `{key}` is not a subcommand");
        }
    }

    let mut out = argv.clone();
    if let Some(pos) = subcommand_position(&argv, command) {
        if let Some(Value::Object(section)) = table.get(argv[pos].as_str()) {
            let tokens = flag_tokens(section, &argv, false)?;
            out.splice(pos + 1..pos + 1, tokens);
        }
    }
    let globals = flag_tokens(&table, &argv, true)?;
    out.splice(1..1, globals);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn command() -> Command {
        Command::new("t")
            .subcommand(Command::new("clean"))
            .subcommand(Command::new("report"))
    }

    fn argv(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn with_config(json: &str, args: &[&str]) -> anyhow::Result<Vec<String>> {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(json.as_bytes()).unwrap();
        let path = file.path().to_str().unwrap().to_string();
        let mut full = argv(&["entail", "--config", &path]);
        full.extend(argv(args));
        let out = apply_config(full, &command())?;
        Ok(out.into_iter().filter(|a| *a != path && a != "--config").collect())
    }

    #[test]
    fn no_config_leaves_argv_alone() {
        let a = argv(&["entail", "clean", "--in", "x"]);
        assert_eq!(apply_config(a.clone(), &command()).unwrap(), a);
    }

    #[test]
    fn sections_land_after_their_subcommand() {
        let out = with_config(
            r#"{"seed": 7, "clean": {"folds": 3, "skip": true, "max_iter": 10}}"#,
            &["clean", "--max-iter", "20"],
        )
        .unwrap();
        assert_eq!(
            out,
            argv(&[
                "entail",
                "--seed",
                "7",
                "clean",
                "--folds",
                "3",
                "--skip",
                "--max-iter",
                "20"
            ])
        );
    }

    #[test]
    fn explicit_flags_win() {
        let out = with_config(r#"{"seed": 7}"#, &["--seed=9", "report"]).unwrap();
        assert_eq!(out, argv(&["entail", "--seed=9", "report"]));
    }

    #[test]
    fn unknown_section_is_rejected() {
        assert!(with_config(r#"{"nope": {}}"#, &["clean"]).is_err());
    }
}
