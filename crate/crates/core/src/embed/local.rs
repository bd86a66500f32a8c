//! Static word-vector backend.
//!
//! Reads a table in the plain-text `.vec` format (an optional `count dim`
//! header line, then `token v1 .. vdim` per line). Input is expected to be
//! segmented already: tokens are whitespace-separated, and a token missing
//! from the table falls back to its individual characters. Stop words are
//! dropped before lookup, unknown tokens are skipped, and the remaining
//! token vectors are pooled.

use std::collections::HashMap;
use std::path::Path;

use crate::data::EmbeddingVector;

use super::{EmbedError, EmbeddingBackend, ModelConfig, PoolingStrategy, StopwordList};

#[derive(Debug, Clone)]
pub struct WordVectorTable {
    dim: usize,
    vectors: HashMap<String, EmbeddingVector>,
}

impl WordVectorTable {
    pub fn parse(text: &str) -> Result<Self, EmbedError> {
        let bad = |line: usize, msg: String| {
            EmbedError::InvalidConfig(format!("word vectors line {line}: {msg}"))
        };
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                dim = Some(fields[1].parse::<usize>().unwrap());
                continue;
            }
            let values: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(i + 1, e.to_string()))?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(bad(i + 1, format!("{} values, expected {d}", values.len())));
                }
                Some(_) => {}
            }
            let v = EmbeddingVector::new(values).map_err(|e| bad(i + 1, e.to_string()))?;
            vectors.insert(fields[0].to_string(), v);
        }
        let dim = dim
            .filter(|&d| d > 0)
            .ok_or_else(|| bad(0, "empty table".into()))?;
        Ok(Self { dim, vectors })
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EmbedError::io(format!("reading word vectors {}", path.display()), e))?;
        Self::parse(&text)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Whitespace tokens, with out-of-vocabulary tokens split into characters.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for tok in text.split_whitespace() {
            if self.vectors.contains_key(tok) {
                out.push(tok.to_string());
            } else {
                out.extend(tok.chars().map(String::from));
            }
        }
        out
    }

    pub fn embed(
        &self,
        text: &str,
        pooling: PoolingStrategy,
        stopwords: Option<&StopwordList>,
    ) -> Result<EmbeddingVector, EmbedError> {
        let tokens = self.tokenize(text);
        let vectors: Vec<EmbeddingVector> = tokens
            .iter()
            .filter(|t| stopwords.is_none_or(|s| !s.contains(t)))
            .filter_map(|t| self.vectors.get(t.as_str()).cloned())
            .collect();
        if vectors.is_empty() {
            return Err(EmbedError::NoKnownTokens(text.to_string()));
        }
        pooling.pool(&vectors)
    }
}

pub(super) struct LocalBackend {
    table: WordVectorTable,
    pooling: PoolingStrategy,
    stopwords: Option<StopwordList>,
}

impl LocalBackend {
    pub(super) fn from_config(config: &ModelConfig) -> Result<Self, EmbedError> {
        let path = config.artifact_path.as_deref().ok_or_else(|| {
            EmbedError::InvalidConfig(format!("{}: missing artifact_path", config.model_id))
        })?;
        let table = WordVectorTable::load(path)?;
        if table.dim() != config.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: config.dim,
                found: table.dim(),
            });
        }
        let stopwords = config
            .stopword_list
            .as_deref()
            .map(StopwordList::load)
            .transpose()?;
        Ok(Self {
            table,
            pooling: config.pooling,
            stopwords,
        })
    }
}

impl EmbeddingBackend for LocalBackend {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .map(|t| self.table.embed(t, self.pooling, self.stopwords.as_ref()))
            .collect()
    }
}
