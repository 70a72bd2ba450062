//! `--config <file>`: a JSON object whose keys are long flag names of the
//! chosen sub-command. Its entries are spliced in right after the sub-command
//! so flags given on the command line win.
//!
//! `{"width": 4096, "no-reorder": true, "angles": [0, 45]}` becomes
//! `--width 4096 --no-reorder --angles 0,45`.

use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};
use serde_json::Value;

fn scalar(key: &str, v: &Value) -> Result<String> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        _ => bail!("config key {key:?}: expected a string, number or boolean"),
    })
}

/// Flag tokens for a config object.
pub fn config_to_args(doc: &Value) -> Result<Vec<OsString>> {
    let Some(obj) = doc.as_object() else {
        bail!("config must be a JSON object");
    };
    let mut out = Vec::new();
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Array(items) => {
                let joined: Vec<String> = items.iter().map(|v| scalar(key, v)).collect::<Result<_>>()?;
                out.push(flag.into());
                out.push(joined.join(",").into());
            }
            other => {
                out.push(flag.into());
                out.push(scalar(key, other)?.into());
            }
        }
    }
    Ok(out)
}

/// Removes `--config <file>` from `argv` and splices the file's flags in
/// after the first positional argument (the sub-command).
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            let path = it.next().context("--config needs a file")?;
            config = Some(path);
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(OsString::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.to_string_lossy()))?;
    let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.to_string_lossy()))?;
    let extra = config_to_args(&doc)?;

    // Skip the program name and global flags (with their values) to find the sub-command.
    let mut i = 1;
    while i < rest.len() {
        let s = rest[i].to_string_lossy();
        if s == "--log-level" {
            i += 2;
        } else if s.starts_with('-') {
            i += 1;
        } else {
            break;
        }
    }
    if i >= rest.len() {
        bail!("--config needs a sub-command");
    }
    rest.splice(i + 1..i + 1, extra);
    Ok(rest)
}
