//! Term-frequency vectors over a sorted vocabulary.

use std::collections::{BTreeSet, HashMap};

use super::{EmbedError, Embedded, EmbeddingBackend, EmbeddingVector, ModelSpec};
use crate::digest::sha256_hex;

/// Lowercased maximal runs of alphabetic characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()).map(str::to_lowercase)
}

/// An ordered term list. Component `i` of a vector counts `terms()[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the given order; repeated terms keep their first position.
    pub fn new(terms: impl IntoIterator<Item = String>) -> Self {
        let mut out = Self { terms: Vec::new(), index: HashMap::new() };
        for t in terms {
            if !out.index.contains_key(&t) {
                out.index.insert(t.clone(), out.terms.len());
                out.terms.push(t);
            }
        }
        out
    }

    /// Every token occurring in any of `texts`, in lexicographic order.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<String> = texts.into_iter().flat_map(tokenize).collect();
        Self::new(set)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn sha256(&self) -> String {
        sha256_hex(self.terms.join("\n").as_bytes())
    }
}

fn count_tokens<I: Iterator<Item = String>>(tokens: I, vocabulary: &Vocabulary) -> Result<EmbeddingVector, EmbedError> {
    if vocabulary.is_empty() {
        return Err(EmbedError::EmptyVocabulary);
    }
    let mut counts = vec![0f32; vocabulary.len()];
    for tok in tokens {
        if let Some(i) = vocabulary.index_of(&tok) {
            counts[i] += 1.0;
        }
    }
    Ok(EmbeddingVector::new(counts))
}

/// Component `i` counts occurrences of `vocabulary[i]`; other tokens are ignored.
pub fn tf_vector(text: &str, vocabulary: &Vocabulary) -> Result<EmbeddingVector, EmbedError> {
    count_tokens(tokenize(text), vocabulary)
}

/// Embeds sentences as term-frequency vectors over a fixed vocabulary.
#[derive(Debug, Clone)]
pub struct ReferenceBackend {
    spec: ModelSpec,
    vocabulary: Vocabulary,
}

impl ReferenceBackend {
    pub fn new(vocabulary: Vocabulary) -> Result<Self, EmbedError> {
        let max_tokens = ModelSpec::reference().max_tokens;
        Self::with_max_tokens(vocabulary, max_tokens)
    }

    pub fn with_max_tokens(vocabulary: Vocabulary, max_tokens: usize) -> Result<Self, EmbedError> {
        if vocabulary.is_empty() {
            return Err(EmbedError::EmptyVocabulary);
        }
        let mut spec = ModelSpec::reference();
        spec.dims = Some(vocabulary.len());
        spec.max_tokens = max_tokens.max(1);
        Ok(Self { spec, vocabulary })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }
}

impl EmbeddingBackend for ReferenceBackend {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn dims(&self) -> usize {
        self.vocabulary.len()
    }

    fn identity(&self) -> String {
        format!("{}:{}:{}", self.spec.identifier, self.spec.max_tokens, self.vocabulary.sha256())
    }

    fn token_count(&self, text: &str) -> Result<usize, EmbedError> {
        Ok(tokenize(text).count())
    }

    fn embed(&self, text: &str) -> Result<Embedded, EmbedError> {
        let max = self.spec.max_tokens;
        let truncated = tokenize(text).nth(max).is_some();
        let vector = count_tokens(tokenize(text).take(max), &self.vocabulary)?;
        Ok(Embedded { vector, truncated })
    }
}
