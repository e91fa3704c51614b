//! Config-file sections merged under command-line flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::Failure;

/// Parsed `--config` file; sections are looked up by dotted path.
#[derive(Debug, Default)]
pub struct ConfigFile {
    root: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| Failure::invalid(format!("malformed config {}: {e}", path.display())))?;
        match serde_json::to_value(table) {
            Ok(Value::Object(root)) => Ok(Self { root }),
            _ => Err(Failure::invalid(format!("config {} is not a table", path.display()))),
        }
    }

    pub fn section(&self, path: &str) -> Map<String, Value> {
        let mut cur = &self.root;
        for key in path.split('.') {
            match cur.get(key) {
                Some(Value::Object(m)) => cur = m,
                _ => return Map::new(),
            }
        }
        // nested tables belong to deeper sections
        cur.iter().filter(|(_, v)| !v.is_object()).map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn top(&self, key: &str) -> Option<&Value> {
        self.root.get(key)
    }
}

/// base ← file ← flags; unset flags (None, false) leave lower layers alone.
pub fn merge<F: Serialize, T: DeserializeOwned>(
    base: Map<String, Value>,
    file: Map<String, Value>,
    flags: &F,
    section: &str,
) -> Result<T, Failure> {
    let mut out = base;
    out.extend(file);
    if let Value::Object(f) = serde_json::to_value(flags).map_err(|e| Failure::invalid(e.to_string()))? {
        for (k, v) in f {
            if !matches!(v, Value::Null | Value::Bool(false)) {
                out.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(out)).map_err(|e| Failure::invalid(format!("[{section}]: {e}")))
}

/// Flags over the `section` table of the config file.
pub fn layered<T: Serialize + DeserializeOwned>(config: &ConfigFile, section: &str, flags: &T) -> Result<T, Failure> {
    merge(Map::new(), config.section(section), flags, section)
}

/// A step size, or `auto` for 0.9 of the scheme's budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Eta {
    Auto,
    Value(f64),
}

impl FromStr for Eta {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Eta::Auto);
        }
        s.parse::<f64>().map(Eta::Value).map_err(|_| format!("expected a number or 'auto', got '{s}'"))
    }
}

impl fmt::Display for Eta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eta::Auto => f.write_str("auto"),
            Eta::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Eta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Eta::Auto => s.serialize_str("auto"),
            Eta::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Eta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Eta::Value(v)),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Eta {
    pub fn resolve(self, eta_max: f64) -> f64 {
        match self {
            Eta::Auto => fa_core::scalar_discrete::DEFAULT_ETA_FRACTION * eta_max,
            Eta::Value(v) => v,
        }
    }
}
