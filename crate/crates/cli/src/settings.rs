//! Option resolution: command-line flag, then `--config` file, then default.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Parsed `key = value` file plus a record of every value actually used.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Ok(Self {
            file: parse_config(&text).with_context(|| format!("in config {}", path.display()))?,
            used: BTreeMap::new(),
        })
    }

    /// Resolves `key`; `flag` wins over the config file, which wins over `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<&str>, default: &str) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let raw = flag.or(self.file.get(key).map(String::as_str)).unwrap_or(default);
        let value: T = raw
            .parse()
            .map_err(|e| anyhow!("invalid value `{raw}` for `{key}`: {e}"))?;
        self.used.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Like [`get`](Self::get) without a default.
    pub fn require<T>(&mut self, key: &str, flag: Option<&str>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        if flag.is_none() && !self.file.contains_key(key) {
            bail!("missing required option --{key}");
        }
        self.get(key, flag, "")
    }

    pub fn used(&self) -> &BTreeMap<String, String> {
        &self.used
    }

    /// Keys present in the config file that no option consumed.
    pub fn unused(&self) -> Vec<&str> {
        self.file
            .keys()
            .filter(|k| !self.used.contains_key(*k))
            .map(String::as_str)
            .collect()
    }
}

/// `key = value` lines; `#` starts a comment. Keys are the long flag names
/// (underscores and dashes are interchangeable).
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", no + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", no + 1);
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

/// A value that can be switched off with `off` (or `none`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Switch<T> {
    Off,
    On(T),
}

impl<T> Switch<T> {
    pub fn into_option(self) -> Option<T> {
        match self {
            Switch::Off => None,
            Switch::On(v) => Some(v),
        }
    }
}

impl<T: FromStr> FromStr for Switch<T> {
    type Err = T::Err;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "off" | "none" => Ok(Switch::Off),
            _ => s.trim().parse().map(Switch::On),
        }
    }
}

impl<T: Display> Display for Switch<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Switch::Off => f.write_str("off"),
            Switch::On(v) => v.fmt(f),
        }
    }
}

/// Comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T> {
    type Err = T::Err;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<Vec<T>, _>>()
            .map(List)
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            v.fmt(f)?;
        }
        Ok(())
    }
}
