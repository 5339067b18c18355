//! Flat key=value configuration files. Keys mirror long flag names; values
//! from the file are injected before explicit flags so the command line
//! always wins.

use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses `key = value` lines; `#` starts a comment, blank lines ignored.
pub fn read_config_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(
                "config {} line {}: expected 'key = value', got {:?}",
                path.display(),
                lineno + 1,
                raw
            );
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            bail!(
                "config {} line {}: empty key or value",
                path.display(),
                lineno + 1
            );
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

/// Rewrites argv so that config-file pairs become flags placed right after
/// the subcommand, letting explicit flags override them.
pub fn expand_config_args(argv: Vec<String>) -> Result<Vec<String>> {
    let mut config_path: Option<String> = None;
    let mut rest: Vec<String> = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            config_path = Some(
                it.next()
                    .context("--config requires a file path argument")?,
            );
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config_path = Some(path.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config_path else {
        return Ok(rest);
    };
    let pairs = read_config_pairs(Path::new(&path))?;
    // [prog, subcommand] + config flags + explicit flags
    if rest.len() < 2 {
        bail!("--config requires a subcommand");
    }
    let mut out: Vec<String> = rest[..2].to_vec();
    for (key, value) in pairs {
        out.push(format!("--{key}"));
        out.push(value);
    }
    out.extend(rest.into_iter().skip(2));
    Ok(out)
}

/// Comma-separated list of non-negative integers ("1,2,3").
pub fn parse_usize_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',')
        .map(|tok| tok.trim().parse::<usize>().map_err(|e| e.to_string()))
        .collect()
}

/// Comma-separated list of reals ("0.0,0.25,0.5").
pub fn parse_f64_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|tok| tok.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}
