//! `run.json`, the scoring run configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "models": [{ "model_id": "hash16", "backend": "TEST", "dim": 16 }],
//!   "top_k": 3,
//!   "standardize_scope": "PER_PROMPT",
//!   "cache_dir": "cache",
//!   "prompts": { "toothbrush": "牙刷" },
//!   "output_dir": "out"
//! }
//! ```
//!
//! Relative paths (`cache_dir`, `output_dir`, per-model `artifact_path` and
//! `stopword_list`) are resolved against the directory holding the config.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::ModelConfig;
use crate::scoring::StandardizeScope;

use super::PipelineError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}
fn default_top_k() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub models: Vec<ModelConfig>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub standardize_scope: StandardizeScope,
    /// No cache when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub prompts: BTreeMap<String, String>,
    pub output_dir: PathBuf,
    /// Elaboration counts only CJK ideographs.
    #[serde(default)]
    pub cjk_only: bool,
}

impl RunConfig {
    /// Parses and validates a config, returning it with its raw bytes (for
    /// the manifest digest). Relative paths are resolved.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), PipelineError> {
        let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
        let mut config = Self::from_slice(&bytes)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok((config, bytes))
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, PipelineError> {
        let config: Self =
            serde_json::from_slice(bytes).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        if self.models.is_empty() {
            return bad("no models configured".into());
        }
        let mut seen = BTreeSet::new();
        for m in &self.models {
            if !seen.insert(m.model_id.as_str()) {
                return bad(format!("duplicate model_id {:?}", m.model_id));
            }
            m.validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if self.prompts.is_empty() {
            return bad("no prompts configured".into());
        }
        for (id, text) in &self.prompts {
            if id.trim().is_empty() || text.trim().is_empty() {
                return bad(format!("prompt {id:?} has an empty id or text"));
            }
        }
        Ok(())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output_dir);
        if let Some(c) = self.cache_dir.as_mut() {
            join(c);
        }
        for m in &mut self.models {
            if let Some(p) = m.artifact_path.as_mut() {
                join(p);
            }
            if let Some(p) = m.stopword_list.as_mut() {
                join(p);
            }
        }
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.models.iter().map(|m| m.model_id.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "models": [{"model_id": "a", "backend": "TEST", "dim": 8}],
        "prompts": {"p": "牙刷"},
        "output_dir": "out"
    }"#;

    #[test]
    fn defaults() {
        let c = RunConfig::from_slice(MINIMAL.as_bytes()).unwrap();
        assert_eq!(c.top_k, 3);
        assert_eq!(c.standardize_scope, StandardizeScope::PerPrompt);
        assert_eq!(c.schema_version, 1);
        assert!(c.cache_dir.is_none());
        assert!(!c.cjk_only);
    }

    #[test]
    fn rejects_bad_values() {
        let with = |patch: &str| {
            MINIMAL.replacen("\"output_dir\"", &format!("{patch}, \"output_dir\""), 1)
        };
        for patch in [
            "\"top_k\": 0",
            "\"schema_version\": 2",
            "\"colour\": 1",
            "\"standardize_scope\": \"SOMETIMES\"",
        ] {
            assert!(
                matches!(
                    RunConfig::from_slice(with(patch).as_bytes()),
                    Err(PipelineError::Config(_))
                ),
                "{patch}"
            );
        }
        let dup = MINIMAL.replace(
            r#"[{"model_id": "a", "backend": "TEST", "dim": 8}]"#,
            r#"[{"model_id": "a", "backend": "TEST", "dim": 8}, {"model_id": "a", "backend": "TEST", "dim": 4}]"#,
        );
        assert!(RunConfig::from_slice(dup.as_bytes()).is_err());
        let remote = MINIMAL.replace(r#""backend": "TEST""#, r#""backend": "REMOTE""#);
        assert!(RunConfig::from_slice(remote.as_bytes()).is_err());
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            MINIMAL.replace("\"out\"", "\"out\", \"cache_dir\": \"/abs/cache\""),
        )
        .unwrap();
        let (c, bytes) = RunConfig::load(&path).unwrap();
        assert_eq!(c.output_dir, dir.path().join("out"));
        assert_eq!(c.cache_dir.as_deref(), Some(Path::new("/abs/cache")));
        assert_eq!(bytes, std::fs::read(&path).unwrap());
    }
}
