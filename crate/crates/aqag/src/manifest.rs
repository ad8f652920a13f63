//! Run manifest: a recorded snapshot of inputs, parameters and versions
//! written alongside every generation/evaluation output so runs can be
//! reproduced.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::inference::GenerationParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub timestamp: String,
    pub tool_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation_params: Option<GenerationParams>,
    /// sha256 of each input file, keyed by role.
    pub input_hashes: BTreeMap<String, String>,
    /// sha256 of each prompt text in effect, keyed by role.
    pub prompt_hashes: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new() -> Self {
        Self {
            timestamp: chrono::Utc::now().to_rfc3339(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            endpoint: None,
            generation_params: None,
            input_hashes: BTreeMap::new(),
            prompt_hashes: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, role: &str, path: &Path) -> std::io::Result<()> {
        let bytes = std::fs::read(path)?;
        self.input_hashes
            .insert(role.to_string(), hash_bytes(&bytes));
        Ok(())
    }

    pub fn record_prompt(&mut self, role: &str, text: &str) {
        self.prompt_hashes
            .insert(role.to_string(), hash_bytes(text.as_bytes()));
    }

    /// Writes the manifest atomically: a temp file in the target directory
    /// renamed into place.
    pub fn write_atomic(&self, path: &Path) -> std::io::Result<()> {
        let value = serde_json::to_value(self).expect("manifest serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("value prints");
        text.push('\n');
        write_atomic_text(path, &text)
    }
}

impl Default for RunManifest {
    fn default() -> Self {
        Self::new()
    }
}

/// Write-then-rename in the target directory. The pid/time suffix keeps
/// concurrent runs in the same directory from colliding.
pub fn write_atomic_text(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.subsec_nanos())
        .unwrap_or(0);
    let temp = dir.join(format!(".write-{}-{nanos}.tmp", std::process::id()));
    let result = std::fs::write(&temp, text).and_then(|()| std::fs::rename(&temp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&temp);
    }
    result
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    Ok(hash_bytes(&std::fs::read(path)?))
}
