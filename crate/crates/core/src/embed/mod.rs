//! Sentence embeddings from pluggable backends.
//!
//! Every backend goes through [`Embedder::embed_batch`], which normalizes
//! text (NFC + trim), consults the on-disk cache, sends misses to the backend
//! in batches and rounds fresh vectors to `f32` before returning or caching
//! them. Because of that rounding a cached run and an uncached run see the
//! same bits.

mod cache;
mod hashing;
#[cfg(feature = "local")]
mod local;
mod pooling;
mod remote;
mod stopwords;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::data::{DataError, EmbeddingVector};

pub use cache::{CacheKey, EmbeddingCache, CACHE_MAGIC, CACHE_VERSION, HEADER_LEN};
pub use hashing::test_embed;
#[cfg(feature = "local")]
pub use local::WordVectorTable;
pub use pooling::{cls_pool, mean_pool};
pub use remote::{RemoteBackend, TOKEN_ENV};
pub use stopwords::{filter_stopwords, StopwordList};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, backend returned {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("corrupt cache entry {path}: {reason}")]
    CacheCorrupt { path: PathBuf, reason: String },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("no known tokens in {0:?}")]
    NoKnownTokens(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl EmbedError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        EmbedError::Io {
            context: context.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PoolingStrategy {
    /// Average of all token vectors.
    #[default]
    #[serde(alias = "mean")]
    Mean,
    /// The first (`[CLS]`) token vector.
    #[serde(alias = "cls")]
    Cls,
}

impl PoolingStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolingStrategy::Mean => "MEAN",
            PoolingStrategy::Cls => "CLS",
        }
    }

    pub fn pool(self, tokens: &[EmbeddingVector]) -> Result<EmbeddingVector, EmbedError> {
        match self {
            PoolingStrategy::Mean => mean_pool(tokens),
            PoolingStrategy::Cls => cls_pool(tokens),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Backend {
    /// Deterministic character-bigram hashing; needs no model files.
    #[serde(alias = "test")]
    Test,
    /// HTTP embedding service.
    #[serde(alias = "remote")]
    Remote,
    /// Static word-vector table read from disk.
    #[serde(alias = "local")]
    Local,
}

fn default_batch_size() -> usize {
    32
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model_id: String,
    pub backend: Backend,
    #[serde(default)]
    pub pooling: PoolingStrategy,
    pub dim: usize,
    /// Only meaningful for token-pooled (`LOCAL`) backends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopword_list: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact_path: Option<PathBuf>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Initial retry delay; doubled after every failed attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

impl ModelConfig {
    /// A `TEST` backend config with default settings.
    pub fn test(model_id: impl Into<String>, dim: usize) -> Self {
        Self {
            model_id: model_id.into(),
            backend: Backend::Test,
            pooling: PoolingStrategy::Mean,
            dim,
            stopword_list: None,
            endpoint: None,
            artifact_path: None,
            batch_size: default_batch_size(),
            max_retries: default_max_retries(),
            backoff_ms: default_backoff_ms(),
            timeout_secs: default_timeout_secs(),
        }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |msg: String| Err(EmbedError::InvalidConfig(msg));
        if self.model_id.trim().is_empty() {
            return bad("model_id is empty".into());
        }
        if self.dim == 0 {
            return bad(format!("{}: dim must be positive", self.model_id));
        }
        if self.batch_size == 0 {
            return bad(format!("{}: batch_size must be positive", self.model_id));
        }
        match self.backend {
            Backend::Remote if self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) => bad(
                format!("{}: REMOTE backend requires an endpoint", self.model_id),
            ),
            Backend::Local if self.artifact_path.is_none() => bad(format!(
                "{}: LOCAL backend requires artifact_path",
                self.model_id
            )),
            Backend::Test | Backend::Remote if self.stopword_list.is_some() => bad(format!(
                "{}: stop-word filtering needs a token-pooled LOCAL backend",
                self.model_id
            )),
            _ => Ok(()),
        }
    }
}

/// NFC-normalizes and trims a text. Cache keys and backends see this form.
pub fn normalize_text(text: &str) -> String {
    text.nfc().collect::<String>().trim().to_string()
}

/// Something that turns a batch of normalized texts into vectors.
pub trait EmbeddingBackend: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

struct HashBackend {
    dim: usize,
}

impl EmbeddingBackend for HashBackend {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| test_embed(t, self.dim)).collect()
    }
}

/// Counters for one [`Embedder`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedStats {
    pub cache_hits: usize,
    pub cache_misses: usize,
    /// Vectors produced by the backend (cache misses actually computed).
    pub computed: usize,
}

/// A model config bound to its backend and an optional cache.
pub struct Embedder {
    config: ModelConfig,
    backend: Box<dyn EmbeddingBackend>,
    cache: Option<EmbeddingCache>,
    hits: AtomicUsize,
    misses: AtomicUsize,
    computed: AtomicUsize,
}

impl std::fmt::Debug for Embedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Embedder")
            .field("config", &self.config)
            .field("cache", &self.cache)
            .finish_non_exhaustive()
    }
}

impl Embedder {
    pub fn new(config: ModelConfig, cache: Option<EmbeddingCache>) -> Result<Self, EmbedError> {
        config.validate()?;
        let backend: Box<dyn EmbeddingBackend> = match config.backend {
            Backend::Test => Box::new(HashBackend { dim: config.dim }),
            Backend::Remote => Box::new(RemoteBackend::from_config(&config)?),
            Backend::Local => local_backend(&config)?,
        };
        Ok(Self::with_backend(config, backend, cache))
    }

    /// Binds a config to a caller-supplied backend.
    pub fn with_backend(
        config: ModelConfig,
        backend: Box<dyn EmbeddingBackend>,
        cache: Option<EmbeddingCache>,
    ) -> Self {
        Self {
            config,
            backend,
            cache,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            computed: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn stats(&self) -> EmbedStats {
        EmbedStats {
            cache_hits: self.hits.load(Ordering::Relaxed),
            cache_misses: self.misses.load(Ordering::Relaxed),
            computed: self.computed.load(Ordering::Relaxed),
        }
    }

    /// Embeds `texts`, one vector per input in input order.
    ///
    /// Backend calls for cache misses are split into `batch_size` chunks and
    /// run on the current rayon pool.
    pub fn embed_batch<S: AsRef<str>>(
        &self,
        texts: &[S],
    ) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        let normalized: Vec<String> = texts.iter().map(|t| normalize_text(t.as_ref())).collect();
        if normalized.iter().any(String::is_empty) {
            return Err(EmbedError::EmptyInput);
        }

        let mut out: Vec<Option<EmbeddingVector>> = vec![None; normalized.len()];
        let mut missing: Vec<usize> = Vec::new();
        for (i, text) in normalized.iter().enumerate() {
            let cached = match &self.cache {
                Some(cache) => self.lookup(cache, text),
                None => None,
            };
            match cached {
                Some(v) => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    out[i] = Some(v);
                }
                None => {
                    if self.cache.is_some() {
                        self.misses.fetch_add(1, Ordering::Relaxed);
                    }
                    missing.push(i);
                }
            }
        }

        let chunks: Vec<&[usize]> = missing.chunks(self.config.batch_size).collect();
        let computed: Vec<Vec<EmbeddingVector>> = chunks
            .par_iter()
            .map(|chunk| {
                let batch: Vec<String> = chunk.iter().map(|&i| normalized[i].clone()).collect();
                self.compute(&batch)
            })
            .collect::<Result<_, _>>()?;

        for (chunk, vectors) in chunks.iter().zip(computed) {
            for (&i, v) in chunk.iter().zip(vectors) {
                out[i] = Some(v);
            }
        }
        Ok(out
            .into_iter()
            .map(|v| v.expect("every slot filled"))
            .collect())
    }

    fn lookup(&self, cache: &EmbeddingCache, text: &str) -> Option<EmbeddingVector> {
        let key = CacheKey::new(&self.config.model_id, self.config.pooling, text);
        match cache.get(&key) {
            Ok(Some(v)) if v.dim() == self.config.dim => Some(v),
            Ok(Some(v)) => {
                log::warn!(
                    "cache entry {} has dim {}, expected {}; recomputing",
                    key.to_hex(),
                    v.dim(),
                    self.config.dim
                );
                cache.evict(&key);
                None
            }
            Ok(None) => None,
            Err(e) => {
                log::warn!("{e}; recomputing");
                None
            }
        }
    }

    fn compute(&self, batch: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let vectors = self.backend.embed(batch)?;
        if vectors.len() != batch.len() {
            return Err(EmbedError::BackendUnavailable(format!(
                "backend returned {} vectors for {} texts",
                vectors.len(),
                batch.len()
            )));
        }
        let mut out = Vec::with_capacity(vectors.len());
        for (text, v) in batch.iter().zip(vectors) {
            if v.dim() != self.config.dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: self.config.dim,
                    found: v.dim(),
                });
            }
            let v = v.quantized();
            if let Some(cache) = &self.cache {
                let key = CacheKey::new(&self.config.model_id, self.config.pooling, text);
                cache.put(&key, &v)?;
            }
            out.push(v);
        }
        self.computed.fetch_add(out.len(), Ordering::Relaxed);
        Ok(out)
    }
}

#[cfg(feature = "local")]
fn local_backend(config: &ModelConfig) -> Result<Box<dyn EmbeddingBackend>, EmbedError> {
    Ok(Box::new(local::LocalBackend::from_config(config)?))
}

#[cfg(not(feature = "local"))]
fn local_backend(config: &ModelConfig) -> Result<Box<dyn EmbeddingBackend>, EmbedError> {
    Err(EmbedError::BackendUnavailable(format!(
        "{}: built without the `local` feature",
        config.model_id
    )))
}

/// One-shot convenience over [`Embedder`].
pub fn embed_batch<S: AsRef<str>>(
    texts: &[S],
    config: &ModelConfig,
    cache: Option<EmbeddingCache>,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    Embedder::new(config.clone(), cache)?.embed_batch(texts)
}
