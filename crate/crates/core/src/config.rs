//! Flat `key = value` configuration text.
//!
//! One entry per line, `#` starts a comment, list values are whitespace
//! separated. Numbers are written with the shortest decimal form that
//! round-trips, so a file written by [`KvConfig::to_text`] re-parses to
//! bit-identical values.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    pub fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn set_list<T: Display>(&mut self, key: &str, values: &[T]) {
        let text = values.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        self.entries.insert(key.to_string(), text);
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    /// Entries of `other` replace entries of `self`.
    pub fn merge(&mut self, other: &KvConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: Display,
    {
        self.get_str(key)
            .map(|v| v.parse::<T>().map_err(|e| ConfigError::invalid(key, format!("`{v}`: {e}"))))
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: Display,
    {
        self.get_str(key)
            .map(|v| {
                v.split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|e| ConfigError::invalid(key, format!("`{s}`: {e}"))))
                    .collect()
            })
            .transpose()
    }

    pub fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: Display,
    {
        self.get_list(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let cfg = KvConfig::parse("# header\nd = 2\nnu = 1 2.5  # trailing\n\nc=0.1,0.2\n").unwrap();
        assert_eq!(cfg.require::<usize>("d").unwrap(), 2);
        assert_eq!(cfg.require_list::<f64>("nu").unwrap(), vec![1.0, 2.5]);
        assert_eq!(cfg.require_list::<f64>("c").unwrap(), vec![0.1, 0.2]);
        assert!(matches!(cfg.require::<f64>("a"), Err(ConfigError::Missing(_))));
    }

    #[test]
    fn syntax_error_has_line() {
        assert!(matches!(KvConfig::parse("a = 1\nbogus\n"), Err(ConfigError::Syntax { line: 2 })));
    }

    #[test]
    fn numbers_round_trip_through_text() {
        let mut cfg = KvConfig::new();
        let v = [0.1 + 0.2, 1.0 / 3.0, 1e-300, 123456.789];
        cfg.set_list("x", &v);
        let back = KvConfig::parse(&cfg.to_text()).unwrap();
        let parsed: Vec<f64> = back.require_list("x").unwrap();
        assert_eq!(parsed.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), v.map(f64::to_bits).to_vec());
    }

    #[test]
    fn invalid_value_names_key() {
        let cfg = KvConfig::parse("seed = abc").unwrap();
        let err = cfg.require::<u64>("seed").unwrap_err();
        assert!(err.to_string().contains("seed"));
    }
}
