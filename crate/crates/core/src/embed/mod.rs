//! Sentence embeddings.
//!
//! Backends implement [`EmbeddingBackend`]. The term-frequency
//! [`ReferenceBackend`] lives here; transformer bundles are executed by a
//! separate crate that implements the same trait on top of
//! [`BundleManifest`]. Vectors are stored unnormalized.

mod bundle;
mod cache;
mod matrix_io;
mod pooling;
mod registry;
mod tf;

use thiserror::Error;

use crate::corpus::Sentence;

pub use bundle::{check_parity, BundleManifest, ParityFixture, ParityReport, MANIFEST_FILE, PARITY_MAX_DELTA, PARITY_MIN_COSINE};
pub use cache::EmbeddingCache;
pub use matrix_io::{decode_matrix, encode_matrix, read_matrix, write_matrix};
pub use pooling::pool_tokens;
pub use registry::{find_model, registry, ModelFamily, ModelSpec, Pooling, REFERENCE_NAME};
pub use tf::{tf_vector, tokenize, ReferenceBackend, Vocabulary};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("every token is masked out")]
    AllMasked,
    #[error("attention mask has {mask} entries for {tokens} tokens")]
    MaskLengthMismatch { mask: usize, tokens: usize },
    #[error("no sentences to embed")]
    EmptySentenceList,
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("failed to load model: {0}")]
    ModelLoadFailure(String),
    #[error("tokenization failed: {0}")]
    TokenizationFailure(String),
    #[error("inference failed: {0}")]
    InferenceFailure(String),
    #[error("expected {expected} dimensions, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid model bundle {path}: {reason}")]
    Bundle { path: std::path::PathBuf, reason: String },
    #[error("embedding cache {path}: {reason}")]
    Cache { path: std::path::PathBuf, reason: String },
    #[error("io error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

/// A dense vector with its Euclidean norm computed once in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    l2_norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        let l2_norm = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        Self { values, l2_norm }
    }

    pub fn zeros(dims: usize) -> Self {
        Self { values: vec![0.0; dims], l2_norm: 0.0 }
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    pub fn is_zero(&self) -> bool {
        self.l2_norm == 0.0
    }
}

/// Rows follow sentence order of `source_part`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub model: ModelSpec,
    pub source_part: String,
    pub dims: usize,
    pub rows: Vec<EmbeddingVector>,
}

impl EmbeddingMatrix {
    pub fn new(model: ModelSpec, source_part: impl Into<String>, rows: Vec<EmbeddingVector>) -> Result<Self, EmbedError> {
        let dims = rows.first().map(EmbeddingVector::dims).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.dims() != dims) {
            return Err(EmbedError::DimensionMismatch { expected: dims, found: bad.dims() });
        }
        Ok(Self { model, source_part: source_part.into(), dims, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Result of a single backend call.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    pub vector: EmbeddingVector,
    pub truncated: bool,
}

pub trait EmbeddingBackend: Send + Sync {
    fn spec(&self) -> &ModelSpec;

    /// Output dimensionality.
    fn dims(&self) -> usize;

    /// Identifies the vector space for cache keys: two backends with the same
    /// identity must map equal text to bit-identical vectors.
    fn identity(&self) -> String;

    /// Number of model tokens in `text`, before truncation.
    fn token_count(&self, text: &str) -> Result<usize, EmbedError>;

    /// Embeds one sentence, truncating to `spec().max_tokens` tokens.
    fn embed(&self, text: &str) -> Result<Embedded, EmbedError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedOutcome {
    pub matrix: EmbeddingMatrix,
    pub cache_hits: usize,
    pub backend_calls: usize,
    /// Sentence indices that exceeded the model's token limit.
    pub truncated: Vec<usize>,
}

/// Embeds `sentences` in order, reading and filling `cache`. `content_hash`
/// identifies the text the sentences came from (the preprocessing output).
pub fn embed_sentences(
    backend: &dyn EmbeddingBackend,
    part_id: &str,
    content_hash: &str,
    sentences: &[Sentence],
    cache: &EmbeddingCache,
) -> Result<EmbedOutcome, EmbedError> {
    if sentences.is_empty() {
        return Err(EmbedError::EmptySentenceList);
    }
    let identity = backend.identity();
    let keys: Vec<u64> = sentences.iter().map(|s| EmbeddingCache::key(&identity, content_hash, &s.text)).collect();
    let cached: Vec<Option<Vec<f32>>> = keys.iter().map(|k| cache.get(*k)).collect();
    let missing: Vec<usize> = cached.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(i, _)| i).collect();

    let compute = |i: &usize| backend.embed(&sentences[*i].text).map(|e| (*i, e));
    #[cfg(feature = "parallel")]
    let fresh: Vec<(usize, Embedded)> = {
        use rayon::prelude::*;
        missing.par_iter().map(compute).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let fresh: Vec<(usize, Embedded)> = missing.iter().map(compute).collect::<Result<_, _>>()?;

    let dims = backend.dims();
    let mut rows: Vec<Option<EmbeddingVector>> = cached.into_iter().map(|c| c.map(EmbeddingVector::new)).collect();
    let mut truncated = Vec::new();
    let mut inserts = Vec::with_capacity(fresh.len());
    for (i, e) in fresh {
        if e.vector.dims() != dims {
            return Err(EmbedError::DimensionMismatch { expected: dims, found: e.vector.dims() });
        }
        if e.truncated {
            truncated.push(i);
        }
        inserts.push((keys[i], e.vector.values().to_vec()));
        rows[i] = Some(e.vector);
    }
    let backend_calls = inserts.len();
    cache.insert_many(inserts)?;

    let max_tokens = backend.spec().max_tokens;
    let mut was_missing = vec![false; sentences.len()];
    for &i in &missing {
        was_missing[i] = true;
    }
    for (i, s) in sentences.iter().enumerate() {
        if !was_missing[i] && backend.token_count(&s.text)? > max_tokens {
            truncated.push(i);
        }
    }
    truncated.sort_unstable();
    for &i in &truncated {
        log::warn!("{part_id}: sentence {i} truncated to {max_tokens} tokens for {}", backend.spec().name);
    }

    let rows: Vec<EmbeddingVector> = rows.into_iter().map(|r| r.expect("every row filled")).collect();
    let matrix = EmbeddingMatrix::new(backend.spec().clone(), part_id, rows)?;
    Ok(EmbedOutcome { matrix, cache_hits: sentences.len() - backend_calls, backend_calls, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        inner: ReferenceBackend,
        calls: AtomicUsize,
    }

    impl EmbeddingBackend for Counting {
        fn spec(&self) -> &ModelSpec {
            self.inner.spec()
        }
        fn dims(&self) -> usize {
            self.inner.dims()
        }
        fn identity(&self) -> String {
            self.inner.identity()
        }
        fn token_count(&self, text: &str) -> Result<usize, EmbedError> {
            self.inner.token_count(text)
        }
        fn embed(&self, text: &str) -> Result<Embedded, EmbedError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.embed(text)
        }
    }

    fn sentences(texts: &[&str]) -> Vec<Sentence> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Sentence { index: i, text: t.to_string(), char_span: (0, t.len()) })
            .collect()
    }

    #[test]
    fn reference_rows_are_tf_vectors() {
        let vocab = Vocabulary::from_texts(["good law", "law good good"]);
        let backend = ReferenceBackend::new(vocab.clone()).unwrap();
        let s = sentences(&["good law", "law good good"]);
        let out = embed_sentences(&backend, "p", "h", &s, &EmbeddingCache::new(&backend)).unwrap();
        assert_eq!(out.matrix.rows[0], tf_vector("good law", &vocab).unwrap());
        assert_eq!(out.matrix.rows[1].values(), &[2.0, 1.0]);
    }

    #[test]
    fn warm_cache_skips_backend() {
        let vocab = Vocabulary::from_texts(["a b c"]);
        let backend = Counting { inner: ReferenceBackend::new(vocab).unwrap(), calls: AtomicUsize::new(0) };
        let cache = EmbeddingCache::new(&backend);
        let s = sentences(&["a b", "c", "a a"]);
        let cold = embed_sentences(&backend, "p", "h", &s, &cache).unwrap();
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
        let warm = embed_sentences(&backend, "p", "h", &s, &cache).unwrap();
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
        assert_eq!(warm.backend_calls, 0);
        assert_eq!(warm.cache_hits, 3);
        assert_eq!(warm.matrix, cold.matrix);
    }

    #[test]
    fn truncation_is_reported_on_cold_and_warm_runs() {
        let vocab = Vocabulary::from_texts(["a b c d"]);
        let backend = ReferenceBackend::with_max_tokens(vocab, 2).unwrap();
        let cache = EmbeddingCache::new(&backend);
        let s = sentences(&["a b c", "d"]);
        assert_eq!(embed_sentences(&backend, "p", "h", &s, &cache).unwrap().truncated, vec![0]);
        assert_eq!(embed_sentences(&backend, "p", "h", &s, &cache).unwrap().truncated, vec![0]);
    }

    #[test]
    fn empty_sentence_list() {
        let backend = ReferenceBackend::new(Vocabulary::from_texts(["x"])).unwrap();
        let err = embed_sentences(&backend, "p", "h", &[], &EmbeddingCache::new(&backend));
        assert!(matches!(err, Err(EmbedError::EmptySentenceList)));
    }

    #[test]
    fn norm_is_cached() {
        let v = EmbeddingVector::new(vec![3.0, 4.0]);
        assert_eq!(v.l2_norm(), 5.0);
        assert!(EmbeddingVector::zeros(3).is_zero());
    }
}
