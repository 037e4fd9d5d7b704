//! Run manifests and the stable configuration hash.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: String,
    pub tool_version: String,
    pub command: String,
    /// See [`config_hash`].
    pub config_hash: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Milliseconds since the Unix epoch.
    pub started_ms: u64,
    pub finished_ms: u64,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self {
            format_version: crate::io::FORMAT_VERSION.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            config_hash,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_ms: now_ms(),
            finished_ms: 0,
        }
    }

    pub fn finish(&mut self) {
        self.finished_ms = now_ms();
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Lower-case hex SHA-256 of the canonical JSON form of `value`: compact
/// separators, object keys sorted, numbers in serde_json's shortest
/// round-trip notation. Field order and whitespace in the source file do
/// not affect the hash.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value).expect("serializable config");
    let bytes = serde_json::to_vec(&canonical).expect("serializable value");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
