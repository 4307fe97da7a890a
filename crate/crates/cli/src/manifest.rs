use std::collections::BTreeMap;
use std::path::Path;

use gpsselect::{GpsError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;

pub const TOOL: &str = "gpsselect";
/// Version of the output document layout.
pub const SCHEMA_VERSION: u32 = 1;
/// Prefix of the manifest line in CSV output.
pub const CSV_MANIFEST_PREFIX: &str = "# manifest: ";

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub invocation: Command,
    /// Values chosen automatically during the run (increment, error
    /// variance, ...), recorded so a replay can confirm them.
    pub resolved: BTreeMap<String, serde_json::Value>,
    pub input: Option<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(invocation: Command, input: Option<InputDigest>) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            invocation,
            resolved: BTreeMap::new(),
            input,
        }
    }

    pub fn resolve(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.resolved.insert(key.to_string(), v);
    }
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path).map_err(|source| GpsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let hash = Sha256::digest(&bytes);
    let sha256 = hash.iter().map(|b| format!("{b:02x}")).collect();
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256,
    })
}

/// Finds the manifest in a JSON document, a JSON-lines stream whose first
/// line carries it, a CSV file with a manifest comment line, or a bare
/// manifest.
pub fn extract(text: &str) -> Result<RunManifest> {
    let first = text.lines().next().unwrap_or("");
    let value: serde_json::Value = if let Some(rest) = first.strip_prefix(CSV_MANIFEST_PREFIX) {
        parse(rest)?
    } else {
        match serde_json::from_str(text) {
            Ok(v) => v,
            Err(_) => parse(first)?,
        }
    };
    let inner = match value.get("manifest") {
        Some(m) => m.clone(),
        None => value,
    };
    serde_json::from_value(inner)
        .map_err(|e| GpsError::InvalidParameter(format!("not a run manifest: {e}")))
}

fn parse(text: &str) -> Result<serde_json::Value> {
    serde_json::from_str(text)
        .map_err(|e| GpsError::InvalidParameter(format!("manifest is not valid JSON: {e}")))
}
