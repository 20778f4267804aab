//! Plain-text experiment configuration.
//!
//! Every subcommand resolves its settings into an ordered key=value map,
//! built from an optional `--config` file overlaid by command-line flags.
//! Unknown keys are rejected, and each run echoes the fully-resolved map
//! into the output metadata so a result regenerates from its own header.

use std::collections::BTreeSet;
use std::fs;

#[derive(Debug, Clone)]
pub struct Config {
    pub command: String,
    entries: Vec<(String, String)>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Verification(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Verification(m) | CliError::Numeric(m) => m,
        }
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

impl From<ssrf_core::Error> for CliError {
    fn from(e: ssrf_core::Error) -> Self {
        match e {
            ssrf_core::Error::Numeric(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl Config {
    /// Builds the config for one subcommand from raw arguments. Flags take
    /// the form `--key value`; a `--config FILE` of `key=value` lines loads
    /// first and flags override it. Keys outside `known` are rejected.
    pub fn parse(
        command: &str,
        args: &[String],
        known: &[&str],
    ) -> Result<Config, CliError> {
        let known_set: BTreeSet<&str> = known.iter().copied().collect();
        let mut file_entries: Vec<(String, String)> = Vec::new();
        let mut flag_entries: Vec<(String, String)> = Vec::new();
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            let key = arg
                .strip_prefix("--")
                .ok_or_else(|| CliError::Usage(format!("expected a --flag, got '{arg}'")))?;
            let value = args
                .get(i + 1)
                .ok_or_else(|| CliError::Usage(format!("flag --{key} needs a value")))?
                .clone();
            i += 2;
            if key == "config" {
                let text = fs::read_to_string(&value).map_err(|e| {
                    CliError::Usage(format!("cannot read config file '{value}': {e}"))
                })?;
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (k, v) = line.split_once('=').ok_or_else(|| {
                        CliError::Usage(format!(
                            "config line {} is not key=value: '{line}'",
                            lineno + 1
                        ))
                    })?;
                    let k = k.trim();
                    if !known_set.contains(k) {
                        return usage(format!("unknown config key '{k}' for {command}"));
                    }
                    file_entries.push((k.to_string(), v.trim().to_string()));
                }
            } else {
                if !known_set.contains(key) {
                    return usage(format!("unknown flag --{key} for {command}"));
                }
                flag_entries.push((key.to_string(), value));
            }
        }
        // Flags override file entries of the same key.
        let mut entries = file_entries;
        for (k, v) in flag_entries {
            if let Some(slot) = entries.iter_mut().find(|(ek, _)| *ek == k) {
                slot.1 = v;
            } else {
                entries.push((k, v));
            }
        }
        Ok(Config {
            command: command.to_string(),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Usage(format!("{}: missing --{key}", self.command)))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        parse_f64(self.require(key)?, key)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.get(key) {
            Some(v) => parse_f64(v, key),
            None => Ok(default),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.require(key)?
            .parse()
            .map_err(|_| CliError::Usage(format!("--{key} must be a non-negative integer")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.require(key)?
            .parse()
            .map_err(|_| CliError::Usage(format!("--{key} must be a 64-bit integer")))
    }

    /// Seeds are always explicit; there is deliberately no environment
    /// fallback.
    pub fn seed(&self) -> Result<u64, CliError> {
        self.u64("seed")
    }

    pub fn out(&self) -> &str {
        self.get("out").unwrap_or("-")
    }

    /// The resolved entries, for echoing into output metadata.
    pub fn echo_lines(&self) -> Vec<String> {
        let mut lines = vec![format!("# cfg:command={}", self.command)];
        for (k, v) in &self.entries {
            lines.push(format!("# cfg:{k}={v}"));
        }
        lines
    }
}

pub fn parse_f64(text: &str, key: &str) -> Result<f64, CliError> {
    text.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--{key}: '{text}' is not a number")))
}

pub fn parse_f64_list(text: &str, key: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|part| parse_f64(part, key))
        .collect()
}

/// Semicolon-separated rows of comma-separated floats.
pub fn parse_f64_rows(text: &str, key: &str) -> Result<Vec<Vec<f64>>, CliError> {
    text.split(';')
        .map(|row| parse_f64_list(row, key))
        .collect()
}

pub fn parse_u32_list(text: &str, key: &str) -> Result<Vec<u32>, CliError> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--{key}: '{part}' is not an integer")))
        })
        .collect()
}
