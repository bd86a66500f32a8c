//! On-disk embedding cache.
//!
//! One file per key at `<root>/<hex[..2]>/<hex>.emb`. Layout:
//!
//! ```text
//! offset  size  field
//!      0     8  magic  b"DTSCEMB\0"
//!      8     4  version (u32 LE)
//!     12     4  dim     (u32 LE)
//!     16  4*dim payload (f32 LE)
//! ```
//!
//! Writes go through a temp file in the same directory followed by a rename,
//! so concurrent readers see either nothing or a complete entry.

use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::EmbeddingVector;

use super::{normalize_text, EmbedError, PoolingStrategy};

pub const CACHE_MAGIC: [u8; 8] = *b"DTSCEMB\0";
pub const CACHE_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

/// SHA-256 over `model_id ‖ 0x00 ‖ pooling ‖ 0x00 ‖ normalized text`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheKey([u8; 32]);

impl CacheKey {
    pub fn new(model_id: &str, pooling: PoolingStrategy, text: &str) -> Self {
        let mut h = Sha256::new();
        h.update(model_id.as_bytes());
        h.update([0]);
        h.update(pooling.as_str().as_bytes());
        h.update([0]);
        h.update(normalize_text(text).as_bytes());
        Self(h.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    root: PathBuf,
}

impl EmbeddingCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        let hex = key.to_hex();
        self.root.join(&hex[..2]).join(format!("{hex}.emb"))
    }

    /// A missing entry is `Ok(None)`. A malformed entry is deleted and
    /// reported as [`EmbedError::CacheCorrupt`].
    pub fn get(&self, key: &CacheKey) -> Result<Option<EmbeddingVector>, EmbedError> {
        let path = self.path_for(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(EmbedError::io(format!("reading {}", path.display()), e)),
        };
        match decode(&bytes) {
            Ok(v) => Ok(Some(v)),
            Err(reason) => {
                let _ = std::fs::remove_file(&path);
                Err(EmbedError::CacheCorrupt { path, reason })
            }
        }
    }

    pub fn put(&self, key: &CacheKey, vector: &EmbeddingVector) -> Result<(), EmbedError> {
        let path = self.path_for(key);
        let dir = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(dir)
            .map_err(|e| EmbedError::io(format!("creating {}", dir.display()), e))?;
        let wrap = |e| EmbedError::io(format!("writing {}", path.display()), e);
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
        tmp.write_all(&encode(vector)).map_err(wrap)?;
        tmp.persist(&path).map_err(|e| wrap(e.error))?;
        Ok(())
    }

    pub fn evict(&self, key: &CacheKey) {
        let _ = std::fs::remove_file(self.path_for(key));
    }
}

fn encode(vector: &EmbeddingVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * vector.dim());
    out.extend_from_slice(&CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(vector.dim() as u32).to_le_bytes());
    for &v in vector.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Result<EmbeddingVector, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if bytes[..8] != CACHE_MAGIC {
        return Err("bad magic".into());
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    if dim == 0 || payload.len() != 4 * dim {
        return Err(format!("payload of {} bytes for dim {dim}", payload.len()));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    EmbeddingVector::new(values).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn round_trip_and_absent() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path());
        let key = CacheKey::new("m", PoolingStrategy::Mean, "床单");
        assert!(cache.get(&key).unwrap().is_none());
        let v = vec_of(&[0.25, -1.5, 3.0]);
        cache.put(&key, &v).unwrap();
        assert_eq!(cache.get(&key).unwrap().unwrap(), v);
        let bytes = std::fs::read(cache.path_for(&key)).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 12);
        assert_eq!(&bytes[..8], b"DTSCEMB\0");
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
    }

    #[test]
    fn truncated_entry_is_corrupt_and_evicted() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path());
        let key = CacheKey::new("m", PoolingStrategy::Mean, "x");
        cache.put(&key, &vec_of(&[1.0, 2.0])).unwrap();
        let path = cache.path_for(&key);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            cache.get(&key),
            Err(EmbedError::CacheCorrupt { .. })
        ));
        assert!(!path.exists());
        assert!(cache.get(&key).unwrap().is_none());
    }

    #[test]
    fn key_depends_on_all_parts_and_normalizes() {
        let k = CacheKey::new("m", PoolingStrategy::Mean, "text");
        assert_eq!(k, CacheKey::new("m", PoolingStrategy::Mean, "  text\n"));
        assert_ne!(k, CacheKey::new("m", PoolingStrategy::Cls, "text"));
        assert_ne!(k, CacheKey::new("n", PoolingStrategy::Mean, "text"));
        // separator keeps ("ab","c") and ("a","bc") apart
        assert_ne!(
            CacheKey::new("ab", PoolingStrategy::Mean, "c"),
            CacheKey::new("a", PoolingStrategy::Mean, "bc")
        );
    }
}
