//! Deterministic embedding for tests and offline runs.
//!
//! The text (NFC, trimmed) is framed with U+0002 / U+0003 so one-character
//! texts still produce two bigrams. Each character bigram is hashed with
//! SHA-256: the first 8 digest bytes (little-endian) pick the bucket, the
//! low bit of byte 8 picks the sign. The bucket counts are L2-normalized.

use sha2::{Digest, Sha256};

use crate::data::EmbeddingVector;

use super::{normalize_text, EmbedError};

const START: char = '\u{2}';
const END: char = '\u{3}';

pub fn test_embed(text: &str, dim: usize) -> Result<EmbeddingVector, EmbedError> {
    if dim == 0 {
        return Err(EmbedError::InvalidConfig("dim must be positive".into()));
    }
    let text = normalize_text(text);
    if text.is_empty() {
        return Err(EmbedError::EmptyInput);
    }

    let chars: Vec<char> = std::iter::once(START)
        .chain(text.chars())
        .chain(std::iter::once(END))
        .collect();
    let mut values = vec![0.0f64; dim];
    let mut buf = [0u8; 8];
    for pair in chars.windows(2) {
        let mut bytes = pair[0].encode_utf8(&mut buf).as_bytes().to_vec();
        bytes.extend_from_slice(pair[1].encode_utf8(&mut buf).as_bytes());
        let digest = Sha256::digest(&bytes);
        let bucket = bucket_of(&digest, dim);
        values[bucket] += if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
    }

    // All contributions cancelled: fall back to a single whole-text bucket.
    if values.iter().all(|&v| v == 0.0) {
        let digest = Sha256::digest(text.as_bytes());
        values[bucket_of(&digest, dim)] = 1.0;
    }

    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(EmbeddingVector::new(
        values.into_iter().map(|v| v / norm).collect(),
    )?)
}

fn bucket_of(digest: &[u8], dim: usize) -> usize {
    let word = u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"));
    (word % dim as u64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from an independent reference implementation of the same
    // procedure (hashlib + unicodedata), run before this module existed.
    const GOLDEN_TOOTHBRUSH_SHOES: [f64; 16] = [
        0.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.5, -0.5,
    ];
    const GOLDEN_CURTAIN: [f64; 16] = [
        0.3779644730092272,
        0.0,
        0.3779644730092272,
        0.0,
        0.0,
        0.7559289460184544,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.3779644730092272,
        0.0,
    ];
    const GOLDEN_LATIN: [f64; 16] = [
        0.0,
        0.30151134457776363,
        0.0,
        0.30151134457776363,
        0.0,
        0.0,
        -0.30151134457776363,
        0.0,
        0.0,
        -0.6030226891555273,
        -0.30151134457776363,
        0.30151134457776363,
        0.0,
        0.30151134457776363,
        -0.30151134457776363,
        0.0,
    ];

    #[test]
    fn golden_vectors() {
        for (text, golden) in [
            ("用牙刷刷鞋", &GOLDEN_TOOTHBRUSH_SHOES),
            ("用床单做窗帘", &GOLDEN_CURTAIN),
            ("toothbrush", &GOLDEN_LATIN),
        ] {
            let v = test_embed(text, 16).unwrap();
            for (a, b) in v.values().iter().zip(golden.iter()) {
                assert!((a - b).abs() < 1e-15, "{text}: {a} vs {b}");
            }
        }
        assert_eq!(
            test_embed("铺床单", 8).unwrap().values(),
            &[0., 0., 0., 0., 0., 0., 1., 0.]
        );
    }

    #[test]
    fn unit_norm_and_deterministic() {
        for text in ["a", "床", "用床单包裹身体当披风", "  padded  ", "x y z"] {
            let v = test_embed(text, 32).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-9);
            assert_eq!(v, test_embed(text, 32).unwrap());
        }
    }

    #[test]
    fn trims_before_hashing() {
        assert_eq!(
            test_embed(" 床单\t", 8).unwrap(),
            test_embed("床单", 8).unwrap()
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(test_embed("", 8), Err(EmbedError::EmptyInput)));
        assert!(matches!(test_embed("  ", 8), Err(EmbedError::EmptyInput)));
        assert!(test_embed("x", 0).is_err());
    }
}
