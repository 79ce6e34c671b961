//! Run manifest: a flat JSON object of scalar key-value pairs recording
//! config, seeds, input digests, artifact paths, and timings.

use crate::error::{Error, Result};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    entries: BTreeMap<String, Value>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set_str("command", command);
        m
    }

    pub fn set_str(&mut self, key: &str, value: impl Into<String>) {
        self.entries
            .insert(key.to_string(), Value::String(value.into()));
    }

    pub fn set_u64(&mut self, key: &str, value: u64) {
        self.entries.insert(key.to_string(), Value::from(value));
    }

    pub fn set_usize(&mut self, key: &str, value: usize) {
        self.set_u64(key, value as u64);
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        // Non-finite floats have no JSON representation; store as strings.
        match serde_json::Number::from_f64(value) {
            Some(n) => {
                self.entries.insert(key.to_string(), Value::Number(n));
            }
            None => self.set_str(key, format!("{value}")),
        }
    }

    pub fn set_bool(&mut self, key: &str, value: bool) {
        self.entries.insert(key.to_string(), Value::Bool(value));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).and_then(|v| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    /// Pretty JSON with keys in sorted order (BTreeMap iteration).
    pub fn to_json_string(&self) -> String {
        let map: Map<String, Value> = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let mut text =
            serde_json::to_string_pretty(&Value::Object(map)).expect("scalar map serializes");
        text.push('\n');
        text
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(map) = value else {
            return Err(Error::Parse {
                context: "manifest".into(),
                reason: "top level must be a JSON object".into(),
            });
        };
        let mut entries = BTreeMap::new();
        for (key, v) in map {
            match v {
                Value::String(_) | Value::Number(_) | Value::Bool(_) => {
                    entries.insert(key, v);
                }
                other => {
                    return Err(Error::Parse {
                        context: "manifest".into(),
                        reason: format!(
                            "key {key:?} holds a non-scalar value {other}; \
                             manifests are flat"
                        ),
                    });
                }
            }
        }
        Ok(Manifest { entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn sha256_hex_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
