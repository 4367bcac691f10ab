use std::fmt;

use serde::{Deserialize, Serialize};

use super::EmbedError;

pub const REFERENCE_NAME: &str = "Reference";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelFamily {
    #[serde(rename = "SBERT")]
    Sbert,
    #[serde(rename = "ALBERT")]
    Albert,
    #[serde(rename = "DistilBERT")]
    DistilBert,
    #[serde(rename = "RoBERTa")]
    Roberta,
    #[serde(rename = "TinyBERT")]
    TinyBert,
    Reference,
    /// A bundle whose identifier is not in the registry.
    #[serde(rename = "custom")]
    Custom,
}

impl ModelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::Sbert => "SBERT",
            ModelFamily::Albert => "ALBERT",
            ModelFamily::DistilBert => "DistilBERT",
            ModelFamily::Roberta => "RoBERTa",
            ModelFamily::TinyBert => "TinyBERT",
            ModelFamily::Reference => "Reference",
            ModelFamily::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Sbert, Self::Albert, Self::DistilBert, Self::Roberta, Self::TinyBert, Self::Reference, Self::Custom]
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    Cls,
}

impl Pooling {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Some(Pooling::Mean),
            "cls" => Some(Pooling::Cls),
            _ => None,
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Mean => "mean",
            Pooling::Cls => "cls",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub identifier: String,
    pub family: ModelFamily,
    pub pooling: Pooling,
    pub max_tokens: usize,
    /// `None` for the reference backend, whose width is the run vocabulary.
    pub dims: Option<usize>,
}

impl ModelSpec {
    fn transformer(name: &str, identifier: &str, family: ModelFamily, max_tokens: usize) -> Self {
        Self {
            name: name.into(),
            identifier: identifier.into(),
            family,
            pooling: Pooling::Mean,
            max_tokens,
            dims: Some(768),
        }
    }

    pub fn reference() -> Self {
        Self {
            name: REFERENCE_NAME.into(),
            identifier: "term-frequency".into(),
            family: ModelFamily::Reference,
            pooling: Pooling::Mean,
            max_tokens: 4096,
            dims: None,
        }
    }

    /// Spec for a bundle that the registry does not know.
    pub fn custom(identifier: &str) -> Self {
        Self {
            name: identifier.into(),
            identifier: identifier.into(),
            family: ModelFamily::Custom,
            pooling: Pooling::Mean,
            max_tokens: 512,
            dims: None,
        }
    }

    pub fn is_reference(&self) -> bool {
        self.family == ModelFamily::Reference
    }
}

/// The five sentence encoders of the ensemble plus the reference backend.
/// Token limits are the published defaults; a bundle manifest overrides them.
pub fn registry() -> Vec<ModelSpec> {
    vec![
        ModelSpec::transformer("SBERT", "all-MPNet-base-v2", ModelFamily::Sbert, 384),
        ModelSpec::transformer("ALBERT", "paraphrase-albert-small-v2", ModelFamily::Albert, 100),
        ModelSpec::transformer("DistilBERT", "distilbert-base-nli-stsb-mean-tokens", ModelFamily::DistilBert, 128),
        ModelSpec::transformer("RoBERTa", "all-distilroberta-v1", ModelFamily::Roberta, 512),
        ModelSpec::transformer("TinyBERT", "paraphrase-TinyBERT-L6-v2", ModelFamily::TinyBert, 128),
        ModelSpec::reference(),
    ]
}

/// Looks a model up by display name or checkpoint identifier,
/// case-insensitively. `"reference"` selects the term-frequency backend.
pub fn find_model(key: &str) -> Result<ModelSpec, EmbedError> {
    registry()
        .into_iter()
        .find(|m| m.name.eq_ignore_ascii_case(key) || m.identifier.eq_ignore_ascii_case(key))
        .ok_or_else(|| EmbedError::UnknownModel(key.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_the_ensemble_and_reference() {
        let ids: Vec<String> = registry().into_iter().map(|m| m.identifier).collect();
        assert_eq!(
            ids,
            [
                "all-MPNet-base-v2",
                "paraphrase-albert-small-v2",
                "distilbert-base-nli-stsb-mean-tokens",
                "all-distilroberta-v1",
                "paraphrase-TinyBERT-L6-v2",
                "term-frequency"
            ]
        );
        for m in registry() {
            assert_eq!(m.pooling, Pooling::Mean);
            assert!(m.dims.is_none_or(|d| d > 0));
            assert!(!m.identifier.is_empty());
        }
    }

    #[test]
    fn lookup() {
        assert_eq!(find_model("tinybert").unwrap().identifier, "paraphrase-TinyBERT-L6-v2");
        assert_eq!(find_model("all-mpnet-base-v2").unwrap().name, "SBERT");
        assert!(find_model("reference").unwrap().is_reference());
        assert!(matches!(find_model("not-a-model"), Err(EmbedError::UnknownModel(_))));
    }

    #[test]
    fn family_filter() {
        let sbert: Vec<_> = registry().into_iter().filter(|m| m.family == ModelFamily::Sbert).collect();
        assert_eq!(sbert.len(), 1);
        assert_eq!(ModelFamily::parse("roberta"), Some(ModelFamily::Roberta));
    }
}
