//! Plain-text `key = value` configuration files and flag precedence.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

const KNOWN_KEYS: &[&str] = &[
    "p",
    "rD",
    "rN",
    "dt",
    "T",
    "alpha",
    "beta",
    "omega",
    "tolerance",
    "max-iter",
    "transport",
    "endpoint",
    "side",
    "r",
    "steps",
    "structure-spans",
    "fluid-spans",
    "fluid-grid",
    "kernel",
    "dim",
    "output",
    "check",
];

/// Values read from a configuration file. Keys match the long flag names.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value", no + 1);
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                bail!("line {}: unknown key {key:?}", no + 1);
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                bail!("line {}: key {key:?} given twice", no + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow::anyhow!("config key {key} = {v:?}: {e}"))
            })
            .transpose()
    }

    /// Flag value if given, else the file value, else `default`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

/// Comma-separated list, e.g. `2,4,8`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<T>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let cfg = FileConfig::parse("# run\np = 3\ndt = 0.05  # finer\n").unwrap();
        assert_eq!(cfg.resolve(Some(4usize), "p", 2).unwrap(), 4);
        assert_eq!(cfg.resolve(None, "p", 2usize).unwrap(), 3);
        assert_eq!(cfg.resolve(None, "rD", 2usize).unwrap(), 2);
        assert_eq!(cfg.resolve(None, "dt", 0.1f64).unwrap(), 0.05);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(FileConfig::parse("p 3").is_err());
        assert!(FileConfig::parse("colour = red").is_err());
        assert!(FileConfig::parse("p = 2\np = 3").is_err());
        let cfg = FileConfig::parse("p = two").unwrap();
        assert!(cfg.get::<usize>("p").is_err());
    }

    #[test]
    fn lists_parse() {
        assert_eq!("2, 4,8".parse::<List<u64>>().unwrap(), List(vec![2, 4, 8]));
        assert!("2,x".parse::<List<u64>>().is_err());
    }
}
