use crate::data::EmbeddingVector;

use super::EmbedError;

/// Component-wise mean of the token vectors.
pub fn mean_pool(token_vectors: &[EmbeddingVector]) -> Result<EmbeddingVector, EmbedError> {
    let first = token_vectors.first().ok_or(EmbedError::EmptyInput)?;
    let dim = first.dim();
    let mut acc = vec![0.0; dim];
    for t in token_vectors {
        if t.dim() != dim {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                found: t.dim(),
            });
        }
        for (a, x) in acc.iter_mut().zip(t.values()) {
            *a += x;
        }
    }
    let n = token_vectors.len() as f64;
    Ok(EmbeddingVector::new(
        acc.into_iter().map(|a| a / n).collect(),
    )?)
}

/// The first token vector, unchanged.
pub fn cls_pool(token_vectors: &[EmbeddingVector]) -> Result<EmbeddingVector, EmbedError> {
    token_vectors.first().cloned().ok_or(EmbedError::EmptyInput)
}
