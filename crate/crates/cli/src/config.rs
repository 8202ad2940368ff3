//! Flat `key = value` configuration.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment (also allowed after a value)
//! key = value
//! list_key = 1, 2, 4
//! ```
//!
//! Keys are identifiers from [`KEYS`]; values are numbers, comma-separated
//! lists or unquoted strings. Command-line `--key value` flags override the
//! file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

pub const KEYS: &[&str] = &[
    "seed",
    "d",
    "d_list",
    "epsilon",
    "eps_list",
    "p",
    "T",
    "alpha",
    "beta",
    "correlation",
    "payoff",
    "weights",
    "strike",
    "measure",
    "mode",
    "max_attempts",
    "eval_samples",
    "oracle_samples",
    "n_cap",
    "out",
    "network",
    "x",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: {detail}")]
    Syntax { origin: Origin, detail: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { key: String, origin: Origin },
    #[error("{origin}: key `{key}` given twice (first at line {first})")]
    Duplicate { key: String, origin: Origin, first: usize },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("{origin}: invalid value for `{key}`: {detail}")]
    Invalid { key: String, origin: Origin, detail: String },
    #[error("cannot read {path}: {detail}")]
    Io { path: PathBuf, detail: String },
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let origin = Origin::File { path: path.to_path_buf(), line: i + 1 };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { origin, detail: format!("expected `key = value`, found `{line}`") });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::Syntax { origin, detail: format!("`{key}` is not an identifier") });
            }
            if value.is_empty() {
                return Err(ConfigError::Syntax { origin, detail: format!("key `{key}` has no value") });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { key: key.to_string(), origin });
            }
            if let Some(Entry { origin: Origin::File { line, .. }, .. }) = config.entries.get(key) {
                return Err(ConfigError::Duplicate { key: key.to_string(), origin, first: *line });
            }
            config.entries.insert(key.to_string(), Entry { value: value.to_string(), origin });
        }
        Ok(config)
    }

    /// Sets `key` from a command-line flag, replacing any file value.
    pub fn set_flag(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { key: key.to_string(), origin: Origin::Flag });
        }
        self.entries.insert(key.to_string(), Entry { value: value.trim().to_string(), origin: Origin::Flag });
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn require_raw(&self, key: &str) -> Result<&str, ConfigError> {
        self.raw(key).ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    /// An error about `key`'s value, located at where it was set.
    pub fn invalid(&self, key: &str, detail: impl fmt::Display) -> ConfigError {
        ConfigError::Invalid {
            key: key.to_string(),
            origin: self.entries.get(key).map_or(Origin::Flag, |e| e.origin.clone()),
            detail: detail.to_string(),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key).map(|v| v.parse::<T>().map_err(|e| self.invalid(key, format!("`{v}`: {e}")))).transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some(raw) = self.raw(key) else { return Ok(None) };
        raw.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<T>().map_err(|e| self.invalid(key, format!("list item `{item}`: {e}")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }
}
