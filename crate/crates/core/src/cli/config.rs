//! Config files: one `flag-name = value` per line, `#` starts a comment.
//! Switches take `true` or `false`. Entries are spliced in ahead of the
//! command-line flags, and since a repeated flag keeps its last value the
//! command line wins.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use crate::error::{Error, Result};

fn find_config(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn subcommand_position(args: &[OsString]) -> Option<usize> {
    let mut skip_next = false;
    for (k, a) in args.iter().enumerate().skip(1) {
        if skip_next {
            skip_next = false;
            continue;
        }
        let a = a.to_string_lossy();
        if a == "--config" {
            skip_next = true;
        } else if !a.starts_with('-') {
            return Some(k);
        }
    }
    None
}

/// Flag tokens for the config entries that apply to `sub`.
pub fn config_tokens(sub: &clap::Command, text: &str, origin: &str) -> Result<Vec<OsString>> {
    let mut tokens = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{origin}:{}", n + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}: expected `key = value`", at())))?;
        let (key, value) = (key.trim(), value.trim().trim_matches('"'));
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key) && key != "config")
            .ok_or_else(|| {
                Error::Config(format!("{}: unknown key {key:?} for `{}`", at(), sub.get_name()))
            })?;
        let flag = OsString::from(format!("--{key}"));
        if arg.get_action().takes_values() {
            tokens.push(flag);
            tokens.push(value.into());
        } else {
            match value {
                "true" => tokens.push(flag),
                "false" => {}
                other => {
                    return Err(Error::Config(format!(
                        "{}: {key} takes true or false, got {other:?}",
                        at()
                    )))
                }
            }
        }
    }
    Ok(tokens)
}

/// Splices the entries of any `--config FILE` into `args` right after the
/// subcommand name.
pub fn expand(cmd: &clap::Command, mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    let Some(pos) = subcommand_position(&args) else {
        return Ok(args);
    };
    let name = args[pos].to_string_lossy().into_owned();
    let Some(sub) = cmd.find_subcommand(&name) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
    let tokens = config_tokens(sub, &text, &path.display().to_string())?;
    args.splice(pos + 1..pos + 1, tokens);
    Ok(args)
}
