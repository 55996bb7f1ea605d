//! `key=value` configuration file. Values are exported as `AUDIT_<KEY>`
//! environment variables unless already set, which gives the precedence
//! flags > environment > config file.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Keys accepted in the config file, each backing the flag of the same name.
pub const KEYS: &[&str] = &[
    "format",
    "threshold",
    "parallelism",
    "db",
    "cassette",
    "github_api",
    "ca_cert",
    "tls_cert",
    "tls_key",
    "bind",
];

pub fn env_name(key: &str) -> String {
    format!("AUDIT_{}", key.to_ascii_uppercase())
}

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key=value", n + 1);
        };
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key {key:?}", n + 1);
        }
        pairs.push((key, value.trim().to_owned()));
    }
    Ok(pairs)
}

/// The `--config` value from raw arguments, else `AUDIT_CONFIG`.
pub fn locate(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_owned());
        }
    }
    std::env::var("AUDIT_CONFIG").ok().filter(|v| !v.is_empty())
}

/// Load `path` and export every key not already present in the environment.
/// Must run before any thread is spawned.
pub fn apply(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let pairs = parse(&text).with_context(|| format!("config {}", path.display()))?;
    for (key, value) in pairs {
        let var = env_name(&key);
        if std::env::var_os(&var).is_none() {
            std::env::set_var(var, value);
        }
    }
    Ok(())
}
