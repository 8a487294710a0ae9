//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are skipped. Keys may be written
//! with `-` or `_`; values may be wrapped in double quotes. A value given on
//! the command line always wins over the file.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

/// Keys accepted in a run configuration file, shared by `fit` and `cluster`.
pub const RUN_KEYS: &[&str] = &[
    "loads",
    "temps",
    "regimes",
    "rank",
    "alpha",
    "beta",
    "temp_resolution",
    "tol",
    "max_sweeps",
    "seed",
    "mode",
    "normalize",
    "out",
    "factors",
    "k",
    "k_min",
    "k_max",
    "restarts",
    "truth",
    "regime_count",
    "site_count",
];

#[derive(Debug, Default)]
pub struct Settings {
    origin: String,
    values: HashMap<String, (usize, String)>,
}

impl Settings {
    pub fn load(path: Option<&Path>, known: &[&str]) -> CliResult<Self> {
        match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
                Self::parse(&text, &path.display().to_string(), known)
            }
            None => Ok(Self::default()),
        }
    }

    pub fn parse(text: &str, origin: &str, known: &[&str]) -> CliResult<Self> {
        let mut values = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                CliError::input(format!("{origin}, line {line}: expected `key = value`"))
            })?;
            let key = key.trim().replace('-', "_");
            if !known.contains(&key.as_str()) {
                return Err(CliError::input(format!("{origin}, line {line}: unknown key `{key}`")));
            }
            let value = value.trim();
            let value = value
                .strip_prefix('"')
                .and_then(|v| v.strip_suffix('"'))
                .unwrap_or(value);
            if values.insert(key.clone(), (line, value.to_string())).is_some() {
                return Err(CliError::input(format!("{origin}, line {line}: duplicate key `{key}`")));
            }
        }
        Ok(Self {
            origin: origin.to_string(),
            values,
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            Some((line, raw)) => raw.parse().map(Some).map_err(|e| {
                CliError::input(format!("{}, line {line}: bad value for `{key}`: {e}", self.origin))
            }),
            None => Ok(None),
        }
    }

    /// Flag value if present, else the file value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn pick_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }
}
