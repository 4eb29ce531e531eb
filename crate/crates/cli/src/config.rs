//! Optional JSON configuration files: values for flags not given on the
//! command line; explicit flags always win.

use std::collections::BTreeMap;
use std::path::Path;

use rocsurv::{Error, Result};
use serde_json::Value;

#[derive(Default)]
pub struct FileConfig {
    values: BTreeMap<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)?;
        let parsed: Value = serde_json::from_str(&text)?;
        let Value::Object(map) = parsed else {
            return Err(Error::InvalidParameter(
                "config file must hold a JSON object".into(),
            ));
        };
        Ok(FileConfig {
            values: map.into_iter().collect(),
        })
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|x| Some(x as usize))
                .ok_or_else(|| bad(key, "a nonnegative integer")),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| bad(key, "an integer")),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| bad(key, "a number")),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| bad(key, "a string")),
        }
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.as_bool().map(Some).ok_or_else(|| bad(key, "a boolean")),
        }
    }
}

fn bad(key: &str, expected: &str) -> Error {
    Error::InvalidParameter(format!("config key `{key}` must be {expected}"))
}

/// Flag value, then config-file value, then the built-in default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flag, then config value, for parameters without a default.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| Error::InvalidParameter(format!("missing required parameter `{name}`")))
}
