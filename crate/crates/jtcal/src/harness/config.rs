//! Flat `key=value` configuration files and shared value grammars.
//!
//! A config file holds one `key=value` pair per line; keys are the long
//! CLI flag names. Blank lines and lines starting with `#` are skipped.
//! Values use the same grammar as the matching flag, so a file line and
//! a flag are interchangeable.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use crate::{Error, Result};

/// Parsed configuration file; duplicate keys keep the last value.
#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "line {}: expected key=value, got '{line}'",
                    idx + 1
                )));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::InvalidConfig(format!("line {}: empty key", idx + 1)));
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Parses an angle: either plain radians (`0.25`, `1e-3`) or a multiple
/// of pi (`pi`, `-pi`, `6/8pi`, `0.75pi`). The value is returned exactly
/// as written; callers wrap it if they need the principal branch.
pub fn parse_phase(s: &str) -> Result<f64> {
    let t = s.trim();
    let bad = |why: &str| Err(Error::BadValue(format!("invalid phase '{s}': {why}")));
    let value = if let Some(head) = t.strip_suffix("pi") {
        let head = head.trim();
        let mult = if head.is_empty() || head == "+" {
            1.0
        } else if head == "-" {
            -1.0
        } else if let Some((num, den)) = head.split_once('/') {
            let num: f64 = match num.trim().parse() {
                Ok(v) => v,
                Err(_) => return bad("numerator is not a number"),
            };
            let den: f64 = match den.trim().parse() {
                Ok(v) => v,
                Err(_) => return bad("denominator is not a number"),
            };
            if den == 0.0 {
                return bad("denominator is zero");
            }
            num / den
        } else {
            match head.parse::<f64>() {
                Ok(v) => v,
                Err(_) => return bad("multiplier is not a number"),
            }
        };
        mult * PI
    } else {
        match t.parse::<f64>() {
            Ok(v) => v,
            Err(_) => return bad("not a number or multiple of pi"),
        }
    };
    if !value.is_finite() {
        return bad("must be finite");
    }
    Ok(value)
}

/// Parses a float, allowing `inf`/`-inf` (used for noiseless SNR) but
/// rejecting NaN.
pub fn parse_f64_flex(s: &str) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => Err(Error::BadValue(format!("invalid number '{s}'"))),
    }
}

/// Parses a comma-separated list with the given item parser.
pub fn parse_list<F>(s: &str, item: F) -> Result<Vec<f64>>
where
    F: Fn(&str) -> Result<f64>,
{
    let values: Result<Vec<f64>> = s.split(',').map(|part| item(part.trim())).collect();
    let values = values?;
    if values.is_empty() {
        return Err(Error::BadValue("empty value list".into()));
    }
    Ok(values)
}
