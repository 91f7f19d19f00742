//! `--config FILE` support: flat `key = value` lines become long flags of
//! the chosen subcommand unless the command line already sets them.

use std::collections::HashSet;

use clap::CommandFactory;

use crate::args::Cli;
use crate::Failure;

const GLOBAL_WITH_VALUE: [&str; 3] = ["--config", "--threads", "--seed"];

/// Parses `key = value` lines; `#` starts a comment. Keys may use `_` or
/// `-` between words.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("config line {}: expected `key = value`", n + 1));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", n + 1));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Rewrites `argv` so config values appear as flags right after the
/// subcommand name.
pub fn apply_config(argv: Vec<String>) -> Result<Vec<String>, Failure> {
    let mut config_path = None;
    let mut sub_pos = None;
    let mut k = 1;
    while k < argv.len() {
        let a = &argv[k];
        if let Some(v) = a.strip_prefix("--config=") {
            config_path = Some(v.to_string());
        } else if a == "--config" {
            config_path = argv.get(k + 1).cloned();
            k += 1;
        } else if GLOBAL_WITH_VALUE.contains(&a.as_str()) {
            k += 1;
        } else if !a.starts_with('-') && sub_pos.is_none() {
            sub_pos = Some(k);
        }
        k += 1;
    }
    let (Some(path), Some(sub_pos)) = (config_path, sub_pos) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::Lib(utaam::Error::Data(format!("config {path}: {e}"))))?;
    let entries = parse_config(&text).map_err(|m| Failure::Lib(utaam::Error::Data(format!("{path}: {m}"))))?;
    let cmd = Cli::command();
    let Some(sub) = cmd.find_subcommand(&argv[sub_pos]) else {
        return Ok(argv);
    };
    let given: HashSet<&str> = argv
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();
    let mut injected = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            return Err(Failure::Usage(format!("{path}: a config file cannot name another config file")));
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| Failure::Usage(format!("{path}: unknown key `{key}` for `{}`", argv[sub_pos])))?;
        if given.contains(key.as_str()) {
            continue;
        }
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}"));
            injected.extend(value.split_whitespace().map(str::to_string));
        } else {
            match value.as_str() {
                "true" => injected.push(format!("--{key}")),
                "false" => {}
                _ => return Err(Failure::Usage(format!("{path}: `{key}` expects true or false"))),
            }
        }
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[sub_pos + 1..]);
    Ok(out)
}
