//! Flat `key = value` configuration files and flag/config/default merging.
//!
//! Keys are the long flag names without the leading dashes (`N`, `alpha`,
//! `rho-max`, ...). List values are comma separated. Lines starting with `#`
//! and blank lines are ignored; a `#` after a value starts a comment too.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().trim_start_matches("--");
            if key.is_empty() {
                return Err(CliError::Usage(format!(
                    "config line {}: empty key",
                    lineno + 1
                )));
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::Usage(format!(
                    "config line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Resolves settings as flag, then config file, then default, and remembers
/// which config keys were consulted so unknown keys can be rejected.
pub struct Resolver {
    config: ConfigFile,
    used: RefCell<BTreeSet<String>>,
}

impl Resolver {
    pub fn new(config: ConfigFile) -> Self {
        Self {
            config,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn lookup(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.config.get(key)
    }

    pub fn opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_config = self.lookup(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_config.map(|v| parse_value(key, v)).transpose()
    }

    pub fn scalar<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    pub fn opt_list<T>(&self, flag: Option<Vec<T>>, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_config = self.lookup(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_config
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value(key, s))
                    .collect()
            })
            .transpose()
    }

    pub fn list<T>(
        &self,
        flag: Option<Vec<T>>,
        key: &str,
        default: Vec<T>,
    ) -> Result<Vec<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.opt_list(flag, key)?.unwrap_or(default))
    }

    /// Fails on config keys that no setting of the current subcommand read.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self.config.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "unknown config key(s) for this subcommand: {}",
                unknown.join(", ")
            )))
        }
    }
}

fn parse_value<T>(key: &str, value: &str) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("config key {key}: invalid value {value:?}: {e}")))
}
