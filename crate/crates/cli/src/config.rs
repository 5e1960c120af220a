//! `--config` files: a flat TOML table whose keys are flag names.
//!
//! `seed = 7` stands for `--seed 7`, `standardize = true` for
//! `--standardize`, and arrays for comma-separated lists. Underscores and
//! hyphens in keys are interchangeable.

use std::ffi::OsString;
use std::path::Path;

use crate::error::CliError;

/// Flags equivalent to the table in `path`.
pub fn config_flags(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    flags_from_str(&text)
}

pub fn flags_from_str(text: &str) -> Result<Vec<OsString>, CliError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse(e.message().to_string()))?;
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            return Err(CliError::Usage("a config file cannot name another config file".into()));
        }
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_, _>>()?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            other => {
                out.push(flag.into());
                out.push(scalar(&other)?.into());
            }
        }
    }
    Ok(out)
}

fn scalar(v: &toml::Value) -> Result<String, CliError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(CliError::Parse("config values must be scalars or arrays of scalars".into())),
    }
}
