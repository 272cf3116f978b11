//! Sectioned `key = value` config files.
//!
//! The format is deliberately flat: `#` comment lines, `[section]`
//! headers, one `key = value` per line. Every command echoes its fully
//! resolved configuration (defaults filled in, flags applied) next to its
//! outputs, so artifacts stay self-describing.

use crate::CliError;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Parsed config: `(section, key) -> (value, line number)`. Keys before
/// the first section header live in the "" section.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<(String, String), (String, usize)>,
    source: String,
}

impl RawConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    return Err(CliError::Usage(format!(
                        "{source} line {line_no}: malformed section header '{line}'"
                    )));
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{source} line {line_no}: expected 'key = value', got '{line}'"
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Usage(format!(
                    "{source} line {line_no}: empty key"
                )));
            }
            if let Some((_, first)) =
                entries.insert((section.clone(), key.clone()), (value, line_no))
            {
                return Err(CliError::Usage(format!(
                    "{source} line {line_no}: duplicate key '{key}' in [{section}] (first at line {first})"
                )));
            }
        }
        Ok(Self {
            entries,
            source: source.to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn keys_in(&self, section: &str) -> Vec<(String, usize)> {
        self.entries
            .iter()
            .filter(|((s, _), _)| s == section)
            .map(|((_, k), (_, line))| (k.clone(), *line))
            .collect()
    }
}

/// Pulls typed values out of a [`RawConfig`], recording everything it
/// resolves (value or default) so the final configuration can be echoed,
/// and flagging typos: any key present in a section the command read but
/// never requested is an error.
pub struct Resolver<'a> {
    raw: &'a RawConfig,
    resolved: Vec<(String, String, String)>,
    requested: Vec<(String, String)>,
    touched_sections: Vec<String>,
}

impl<'a> Resolver<'a> {
    pub fn new(raw: &'a RawConfig) -> Self {
        Self {
            raw,
            resolved: Vec::new(),
            requested: Vec::new(),
            touched_sections: Vec::new(),
        }
    }

    fn fetch(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        if !self.touched_sections.iter().any(|s| s == section) {
            self.touched_sections.push(section.to_string());
        }
        self.requested.push((section.to_string(), key.to_string()));
        self.raw
            .entries
            .get(&(section.to_string(), key.to_string()))
            .cloned()
    }

    fn record(&mut self, section: &str, key: &str, value: String) {
        self.resolved
            .push((section.to_string(), key.to_string(), value));
    }

    pub fn string(&mut self, section: &str, key: &str, default: &str) -> String {
        let v = self
            .fetch(section, key)
            .map(|(v, _)| v)
            .unwrap_or_else(|| default.to_string());
        self.record(section, key, v.clone());
        v
    }

    fn parsed<T: std::str::FromStr + ToString>(
        &mut self,
        section: &str,
        key: &str,
        default: T,
        kind: &str,
    ) -> Result<T, CliError> {
        let out = match self.fetch(section, key) {
            None => default,
            Some((v, line)) => v.parse::<T>().map_err(|_| {
                CliError::Usage(format!(
                    "{} line {line}: [{section}] {key}: expected {kind}, got '{v}'",
                    self.raw.source
                ))
            })?,
        };
        self.record(section, key, out.to_string());
        Ok(out)
    }

    pub fn f64(&mut self, section: &str, key: &str, default: f64) -> Result<f64, CliError> {
        self.parsed(section, key, default, "a number")
    }

    pub fn usize(&mut self, section: &str, key: &str, default: usize) -> Result<usize, CliError> {
        self.parsed(section, key, default, "a non-negative integer")
    }

    pub fn u64(&mut self, section: &str, key: &str, default: u64) -> Result<u64, CliError> {
        self.parsed(section, key, default, "a non-negative integer")
    }

    pub fn bool(&mut self, section: &str, key: &str, default: bool) -> Result<bool, CliError> {
        self.parsed(section, key, default, "true or false")
    }

    /// A string restricted to listed choices.
    pub fn choice(
        &mut self,
        section: &str,
        key: &str,
        default: &str,
        choices: &[&str],
    ) -> Result<String, CliError> {
        let (v, line) = match self.fetch(section, key) {
            None => (default.to_string(), 0),
            Some((v, line)) => (v, line),
        };
        if !choices.contains(&v.as_str()) {
            return Err(CliError::Usage(format!(
                "{} line {line}: [{section}] {key}: expected one of {}, got '{v}'",
                self.raw.source,
                choices.join("|")
            )));
        }
        self.record(section, key, v.clone());
        Ok(v)
    }

    /// Overrides an already-resolved value (used for flag overrides), so
    /// the echo reflects what actually ran.
    pub fn override_value(&mut self, section: &str, key: &str, value: String) {
        if let Some(slot) = self
            .resolved
            .iter_mut()
            .find(|(s, k, _)| s == section && k == key)
        {
            slot.2 = value;
        } else {
            self.record(section, key, value);
        }
    }

    /// Errors on any key the file defines in a section this command read
    /// but never asked for (almost always a typo).
    pub fn reject_unknown_keys(&self) -> Result<(), CliError> {
        for section in &self.touched_sections {
            for (key, line) in self.raw.keys_in(section) {
                if !self
                    .requested
                    .iter()
                    .any(|(s, k)| s == section && k == &key)
                {
                    return Err(CliError::Usage(format!(
                        "{} line {line}: unknown key '{key}' in [{section}]",
                        self.raw.source
                    )));
                }
            }
        }
        Ok(())
    }

    /// The resolved configuration in the same file format.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut sections: Vec<&str> = Vec::new();
        for (s, _, _) in &self.resolved {
            if !sections.contains(&s.as_str()) {
                sections.push(s);
            }
        }
        for section in sections {
            if !section.is_empty() {
                let _ = writeln!(out, "[{section}]");
            }
            for (s, k, v) in &self.resolved {
                if s == section {
                    let _ = writeln!(out, "{k} = {v}");
                }
            }
            let _ = writeln!(out);
        }
        out
    }
}
