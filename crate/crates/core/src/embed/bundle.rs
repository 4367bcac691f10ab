//! Exported model bundles: a directory holding an ONNX graph, tokenizer
//! assets and `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingVector, ModelSpec, Pooling};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Largest per-component difference a bundle may show against its recorded
/// parity vectors.
pub const PARITY_MAX_DELTA: f64 = 1e-3;
pub const PARITY_MIN_COSINE: f64 = 0.9999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityFixture {
    pub sentence: String,
    /// Reference embedding at full precision.
    pub vector: Vec<f64>,
    /// Deltas measured at export time, when recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub identifier: String,
    pub dims: usize,
    pub max_tokens: usize,
    pub pooling: Pooling,
    pub graph_file: String,
    pub tokenizer_file: String,
    #[serde(default)]
    pub revision: Option<String>,
    #[serde(default)]
    pub export_tools: BTreeMap<String, String>,
    pub parity: Vec<ParityFixture>,
}

impl BundleManifest {
    pub fn load(dir: &Path) -> Result<Self, EmbedError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| EmbedError::Io { path: path.clone(), source })?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| EmbedError::Bundle { path: dir.to_path_buf(), reason: format!("manifest: {e}") })?;
        m.validate(dir)?;
        Ok(m)
    }

    pub fn validate(&self, dir: &Path) -> Result<(), EmbedError> {
        let bad = |reason: String| Err(EmbedError::Bundle { path: dir.to_path_buf(), reason });
        if self.format_version != BUNDLE_FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        if self.identifier.trim().is_empty() {
            return bad("empty identifier".into());
        }
        if self.dims == 0 || self.max_tokens == 0 {
            return bad("dims and max_tokens must be positive".into());
        }
        if self.parity.is_empty() {
            return bad("no parity fixtures".into());
        }
        for p in &self.parity {
            if p.vector.len() != self.dims {
                return bad(format!("parity vector for {:?} has {} dims, manifest says {}", p.sentence, p.vector.len(), self.dims));
            }
        }
        for f in [&self.graph_file, &self.tokenizer_file] {
            if !dir.join(f).is_file() {
                return bad(format!("missing file {f}"));
            }
        }
        Ok(())
    }

    pub fn graph_path(&self, dir: &Path) -> PathBuf {
        dir.join(&self.graph_file)
    }

    pub fn tokenizer_path(&self, dir: &Path) -> PathBuf {
        dir.join(&self.tokenizer_file)
    }

    /// `base` with the manifest's dims, token limit and pooling.
    pub fn apply_to(&self, base: &ModelSpec) -> ModelSpec {
        ModelSpec { dims: Some(self.dims), max_tokens: self.max_tokens, pooling: self.pooling, ..base.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityReport {
    pub sentence: String,
    pub max_delta: f64,
    pub cosine: f64,
}

impl ParityReport {
    pub fn passes(&self) -> bool {
        self.max_delta <= PARITY_MAX_DELTA && self.cosine >= PARITY_MIN_COSINE
    }
}

/// Compares `embed(sentence)` with every recorded parity vector.
pub fn check_parity(
    manifest: &BundleManifest,
    mut embed: impl FnMut(&str) -> Result<EmbeddingVector, EmbedError>,
) -> Result<Vec<ParityReport>, EmbedError> {
    manifest
        .parity
        .iter()
        .map(|p| {
            let got = embed(&p.sentence)?;
            if got.dims() != p.vector.len() {
                return Err(EmbedError::DimensionMismatch { expected: p.vector.len(), found: got.dims() });
            }
            let mut dot = 0.0;
            let mut nr = 0.0;
            let mut max_delta: f64 = 0.0;
            for (&g, &r) in got.values().iter().zip(&p.vector) {
                let g = f64::from(g);
                max_delta = max_delta.max((g - r).abs());
                dot += g * r;
                nr += r * r;
            }
            let denom = got.l2_norm() * nr.sqrt();
            let cosine = if denom > 0.0 { (dot / denom).clamp(-1.0, 1.0) } else { 0.0 };
            Ok(ParityReport { sentence: p.sentence.clone(), max_delta, cosine })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_bundle(dir: &Path, dims: usize, vector_len: usize) {
        std::fs::write(dir.join("model.onnx"), b"graph").unwrap();
        std::fs::write(dir.join("tokenizer.json"), b"{}").unwrap();
        let manifest = serde_json::json!({
            "format_version": 1,
            "identifier": "paraphrase-TinyBERT-L6-v2",
            "dims": dims,
            "max_tokens": 128,
            "pooling": "mean",
            "graph_file": "model.onnx",
            "tokenizer_file": "tokenizer.json",
            "parity": [{"sentence": "A.", "vector": vec![0.5; vector_len]}],
        });
        std::fs::write(dir.join(MANIFEST_FILE), manifest.to_string()).unwrap();
    }

    #[test]
    fn loads_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), 2, 2);
        let m = BundleManifest::load(dir.path()).unwrap();
        assert_eq!(m.pooling, Pooling::Mean);
        let ok = check_parity(&m, |_| Ok(EmbeddingVector::new(vec![0.5, 0.5004]))).unwrap();
        assert!(ok[0].passes(), "{ok:?}");
        let off = check_parity(&m, |_| Ok(EmbeddingVector::new(vec![0.5, 0.6]))).unwrap();
        assert!(!off[0].passes());
    }

    #[test]
    fn rejects_bad_bundles() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), 2, 3);
        assert!(matches!(BundleManifest::load(dir.path()), Err(EmbedError::Bundle { .. })));
        write_bundle(dir.path(), 2, 2);
        std::fs::remove_file(dir.path().join("model.onnx")).unwrap();
        assert!(BundleManifest::load(dir.path()).unwrap_err().to_string().contains("model.onnx"));
    }

    #[test]
    fn manifest_overrides_spec() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(dir.path(), 2, 2);
        let m = BundleManifest::load(dir.path()).unwrap();
        let spec = m.apply_to(&super::super::find_model("TinyBERT").unwrap());
        assert_eq!((spec.dims, spec.max_tokens, spec.name.as_str()), (Some(2), 128, "TinyBERT"));
    }
}
