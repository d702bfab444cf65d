//! Plain key-value config files and flag/file/default resolution.
//!
//! A config file holds `key = value` lines with `#` comments. Command-line
//! flags override file values; the fully resolved set is echoed into every
//! output header so a run can be reproduced from its own artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

/// Parsed config file plus the resolved values actually used by a run.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    file_values: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn from_file(path: Option<&Path>) -> Result<Self, CliError> {
        let mut file_values = BTreeMap::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(CliError::Usage(format!(
                        "{}:{}: expected `key = value`, got `{raw}`",
                        p.display(),
                        lineno + 1
                    )));
                };
                file_values.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Settings { file_values, resolved: BTreeMap::new() })
    }

    /// Resolve one setting: explicit flag beats config file beats default.
    /// Records the winning value for the output-header echo.
    pub fn resolve<T: Resolvable>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CliError> {
        let value = match flag {
            Some(v) => v,
            None => match self.file_values.get(key) {
                Some(raw) => T::parse(raw).ok_or_else(|| {
                    CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`"))
                })?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), value.display());
        Ok(value)
    }

    /// Optional setting with no default.
    pub fn resolve_opt<T: Resolvable>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, CliError> {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file_values.get(key) {
                Some(raw) => Some(T::parse(raw).ok_or_else(|| {
                    CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`"))
                })?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.display());
        }
        Ok(value)
    }

    /// Overwrite an echoed value (used when a loaded artifact is
    /// authoritative for a setting).
    pub fn record(&mut self, key: &str, value: String) {
        self.resolved.insert(key.to_string(), value);
    }

    /// Sorted `key=value` pairs of everything resolved so far.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.resolved.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

/// Types that can come from a config file and be echoed back.
pub trait Resolvable: Sized {
    fn parse(raw: &str) -> Option<Self>;
    fn display(&self) -> String;
}

impl Resolvable for f64 {
    fn parse(raw: &str) -> Option<Self> {
        raw.parse().ok()
    }
    fn display(&self) -> String {
        crate::output::fmt_f64(*self)
    }
}

impl Resolvable for usize {
    fn parse(raw: &str) -> Option<Self> {
        raw.parse().ok()
    }
    fn display(&self) -> String {
        format!("{self}")
    }
}

impl Resolvable for u64 {
    fn parse(raw: &str) -> Option<Self> {
        raw.parse().ok()
    }
    fn display(&self) -> String {
        format!("{self}")
    }
}

impl Resolvable for String {
    fn parse(raw: &str) -> Option<Self> {
        Some(raw.to_string())
    }
    fn display(&self) -> String {
        self.clone()
    }
}
