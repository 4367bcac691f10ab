use super::{EmbedError, EmbeddingVector, Pooling};

/// Collapses per-token vectors into one sentence vector. `attention_mask`
/// entries are 0 or nonzero; mean pooling averages the unmasked rows in `f64`.
pub fn pool_tokens(token_vectors: &[Vec<f32>], attention_mask: &[i64], strategy: Pooling) -> Result<EmbeddingVector, EmbedError> {
    if attention_mask.len() != token_vectors.len() {
        return Err(EmbedError::MaskLengthMismatch { mask: attention_mask.len(), tokens: token_vectors.len() });
    }
    if !attention_mask.iter().any(|&m| m != 0) {
        return Err(EmbedError::AllMasked);
    }
    let dims = token_vectors[0].len();
    if let Some(bad) = token_vectors.iter().find(|v| v.len() != dims) {
        return Err(EmbedError::DimensionMismatch { expected: dims, found: bad.len() });
    }
    match strategy {
        Pooling::Cls => Ok(EmbeddingVector::new(token_vectors[0].clone())),
        Pooling::Mean => {
            let mut sum = vec![0f64; dims];
            let mut n = 0usize;
            for (row, _) in token_vectors.iter().zip(attention_mask).filter(|(_, &m)| m != 0) {
                for (s, &v) in sum.iter_mut().zip(row) {
                    *s += f64::from(v);
                }
                n += 1;
            }
            Ok(EmbeddingVector::new(sum.into_iter().map(|s| (s / n as f64) as f32).collect()))
        }
    }
}
