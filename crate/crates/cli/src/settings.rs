//! Resolution of run settings: command-line flag, then config file, then
//! built-in default. Every resolved value is recorded for the manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Bad flags, config entries or input files. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    /// Reads `key = value` lines; blank lines and `#` comments are skipped.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let body = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut file = BTreeMap::new();
        for (i, line) in body.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
            let key = k.trim().replace('_', "-");
            if file.insert(key.clone(), v.trim().to_owned()).is_some() {
                return Err(usage(format!("{}:{}: duplicate key {key}", path.display(), i + 1)));
            }
        }
        Ok(Self {
            file,
            ..Self::default()
        })
    }

    fn parse<T>(key: &str, raw: &str) -> anyhow::Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        raw.parse()
            .map_err(|e| usage(format!("bad value {raw:?} for {key}: {e}")))
    }

    /// Flag value, else config value, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> anyhow::Result<T>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        Ok(self.opt(key, flag)?.map_or_else(
            || {
                self.resolved.insert(key.to_owned(), default.to_string());
                default
            },
            |v| v,
        ))
    }

    /// Like [`get`](Self::get) without a default; unset values are not
    /// recorded.
    pub fn opt<T>(&mut self, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        self.used.insert(key.to_owned());
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(Self::parse(key, raw)?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_owned(), v.to_string());
        }
        Ok(value)
    }

    /// Like [`opt`](Self::opt) but kept out of the manifest.
    pub fn unrecorded<T>(&mut self, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let v = self.opt(key, flag)?;
        self.resolved.remove(key);
        Ok(v)
    }

    /// A boolean switch: set by the flag, or by `true`/`false` in the file.
    pub fn switch(&mut self, key: &str, flag: bool, default: bool) -> anyhow::Result<bool> {
        self.get(key, flag.then_some(true), default)
    }

    /// Fails on config keys that the command never asked for.
    pub fn check_unused(&self) -> anyhow::Result<()> {
        let unknown: Vec<&str> = self
            .file
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(usage(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

/// Comma-separated list such as `lasso,sace` or `0,0.5,1`.
pub fn parse_list<T>(key: &str, raw: &str) -> anyhow::Result<Vec<T>>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Settings::parse(key, s))
        .collect()
}
