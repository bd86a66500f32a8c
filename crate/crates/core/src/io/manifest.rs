use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// `sha256:<hex>` of raw bytes.
pub fn sha256_digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Digest of a JSON document after canonicalization (keys sorted, no
/// insignificant whitespace), so reformatting a config does not change it.
/// Falls back to the raw-byte digest when `bytes` is not JSON.
pub fn canonical_json_digest(bytes: &[u8]) -> String {
    match serde_json::from_slice::<serde_json::Value>(bytes) {
        Ok(v) => sha256_digest(
            serde_json::to_string(&v)
                .expect("Value serializes")
                .as_bytes(),
        ),
        Err(_) => sha256_digest(bytes),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRunStats {
    pub model_id: String,
    /// Distinct texts embedded (prompts plus responses).
    pub embeddings: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_digest: String,
    pub dataset_digest: String,
    pub models: Vec<ModelRunStats>,
    pub cache_enabled: bool,
    /// RFC 3339, UTC. Taken from `SOURCE_DATE_EPOCH` when set.
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(
        config_bytes: &[u8],
        dataset_bytes: &[u8],
        models: Vec<ModelRunStats>,
        cache_enabled: bool,
    ) -> Self {
        Self {
            schema_version: super::CONFIG_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: canonical_json_digest(config_bytes),
            dataset_digest: sha256_digest(dataset_bytes),
            models,
            cache_enabled,
            timestamp: timestamp_now(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| PipelineError::Parse {
            row: 0,
            message: e.to_string(),
        })
    }
}

fn timestamp_now() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    fixed
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
