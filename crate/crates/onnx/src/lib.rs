//! Runs exported transformer bundles with tract.
//!
//! A bundle directory holds `manifest.json`, an ONNX graph taking
//! `input_ids`, `attention_mask` and optionally `token_type_ids`
//! (`int64 [batch, seq]`) and returning token states (`float32
//! [batch, seq, hidden]`), and a `tokenizer.json`. Sentences are embedded one
//! at a time; pooling happens in Rust so CLS and mean pooling share the graph.

use std::path::{Path, PathBuf};

use tokenizers::{Tokenizer, TruncationParams};
use tract_onnx::prelude::*;
use tract_onnx::tract_core::internal::DefaultRuntime;

use sts_influence::config::AnalysisConfig;
use sts_influence::digest::sha256_hex;
use sts_influence::embed::{
    check_parity, find_model, pool_tokens, BundleManifest, EmbedError, Embedded, EmbeddingBackend, ModelSpec, ParityReport,
};
use sts_influence::pipeline::BackendFactory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Input {
    Ids,
    Mask,
    TypeIds,
}

pub struct OnnxBackend {
    spec: ModelSpec,
    dims: usize,
    identity: String,
    /// Truncates to the token limit, keeping special tokens.
    tokenizer: Tokenizer,
    /// Same tokenizer without truncation, for counting.
    counter: Tokenizer,
    plan: Box<dyn Runnable>,
    inputs: Vec<Input>,
    output: usize,
}

fn load_err(dir: &Path, what: &str, e: impl std::fmt::Display) -> EmbedError {
    EmbedError::ModelLoadFailure(format!("{}: {what}: {e:#}", dir.display()))
}

fn bundle_err(dir: &Path, reason: String) -> EmbedError {
    EmbedError::Bundle { path: dir.to_path_buf(), reason }
}

impl OnnxBackend {
    /// Loads a bundle whose spec is taken from the registry when the
    /// identifier is known.
    pub fn load(dir: &Path) -> Result<Self, EmbedError> {
        let manifest = BundleManifest::load(dir)?;
        let spec = find_model(&manifest.identifier).unwrap_or_else(|_| ModelSpec::custom(&manifest.identifier));
        Self::with_manifest(dir, &manifest, &spec)
    }

    /// Loads a bundle for `spec`. The manifest's dims, token limit and pooling
    /// take precedence over the spec's.
    pub fn from_bundle(dir: &Path, spec: &ModelSpec) -> Result<Self, EmbedError> {
        let manifest = BundleManifest::load(dir)?;
        if !manifest.identifier.eq_ignore_ascii_case(&spec.identifier) {
            return Err(bundle_err(dir, format!("bundle holds {}, expected {}", manifest.identifier, spec.identifier)));
        }
        Self::with_manifest(dir, &manifest, spec)
    }

    fn with_manifest(dir: &Path, manifest: &BundleManifest, base: &ModelSpec) -> Result<Self, EmbedError> {
        let spec = manifest.apply_to(base);
        let graph_path = manifest.graph_path(dir);
        let tokenizer_path = manifest.tokenizer_path(dir);
        let read = |p: &PathBuf| std::fs::read(p).map_err(|source| EmbedError::Io { path: p.clone(), source });
        let graph_bytes = read(&graph_path)?;
        let tokenizer_bytes = read(&tokenizer_path)?;

        let mut counter = Tokenizer::from_bytes(&tokenizer_bytes).map_err(|e| load_err(dir, "tokenizer", e))?;
        counter.with_padding(None);
        counter.with_truncation(None).map_err(|e| load_err(dir, "tokenizer", e))?;
        let mut tokenizer = counter.clone();
        tokenizer
            .with_truncation(Some(TruncationParams { max_length: spec.max_tokens, ..Default::default() }))
            .map_err(|e| load_err(dir, "tokenizer", e))?;

        let model = tract_onnx::onnx()
            .model_for_read(&mut graph_bytes.as_slice())
            .map_err(|e| load_err(dir, "graph", e))?;
        let mut inputs = Vec::new();
        for outlet in model.input_outlets().map_err(|e| load_err(dir, "graph", e))? {
            let name = model.node(outlet.node).name.as_str();
            inputs.push(match name {
                "input_ids" => Input::Ids,
                "attention_mask" => Input::Mask,
                "token_type_ids" => Input::TypeIds,
                other => return Err(bundle_err(dir, format!("unexpected graph input {other:?}"))),
            });
        }
        if !inputs.contains(&Input::Ids) || !inputs.contains(&Input::Mask) {
            return Err(bundle_err(dir, "graph needs input_ids and attention_mask inputs".into()));
        }
        let outputs = model.output_outlets().map_err(|e| load_err(dir, "graph", e))?;
        let output = outputs
            .iter()
            .position(|o| model.node(o.node).name == "last_hidden_state")
            .unwrap_or(0);
        let typed = model.into_optimized().map_err(|e| load_err(dir, "graph", e))?;
        let plan = DefaultRuntime.prepare(typed).map_err(|e| load_err(dir, "graph", e))?;

        let identity = format!(
            "onnx:{}:{}:{}:{}:{}:{}",
            spec.identifier,
            manifest.revision.as_deref().unwrap_or("-"),
            spec.pooling,
            spec.max_tokens,
            sha256_hex(&graph_bytes),
            sha256_hex(&tokenizer_bytes)
        );
        let backend = Self { dims: manifest.dims, spec, identity, tokenizer, counter, plan, inputs, output };

        let reports = backend.parity(manifest)?;
        if let Some(bad) = reports.iter().find(|r| !r.passes()) {
            return Err(bundle_err(
                dir,
                format!("parity check failed for {:?}: max delta {:.2e}, cosine {:.6}", bad.sentence, bad.max_delta, bad.cosine),
            ));
        }
        Ok(backend)
    }

    /// Embeds every parity sentence of `manifest` and compares it with the
    /// recorded vector.
    pub fn parity(&self, manifest: &BundleManifest) -> Result<Vec<ParityReport>, EmbedError> {
        check_parity(manifest, |s| self.embed(s).map(|e| e.vector))
    }

    fn infer(&self, ids: &[i64], mask: &[i64], type_ids: &[i64]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let n = ids.len();
        let fail = |e: TractError| EmbedError::InferenceFailure(format!("{}: {e}", self.spec.name));
        let tensor = |v: &[i64]| Tensor::from_shape(&[1, n], v).map(|t| t.into_tvalue());
        let mut values = TVec::new();
        for input in &self.inputs {
            let data = match input {
                Input::Ids => ids,
                Input::Mask => mask,
                Input::TypeIds => type_ids,
            };
            values.push(tensor(data).map_err(fail)?);
        }
        let out = self.plan.run(values).map_err(fail)?;
        let hidden = out
            .get(self.output)
            .ok_or_else(|| EmbedError::InferenceFailure(format!("{}: graph returned no output", self.spec.name)))?;
        let view = hidden.to_plain_array_view::<f32>().map_err(fail)?;
        let shape = view.shape();
        if shape.len() != 3 || shape[0] != 1 || shape[1] != n {
            return Err(EmbedError::InferenceFailure(format!(
                "{}: expected output shape [1, {n}, hidden], found {shape:?}",
                self.spec.name
            )));
        }
        let flat: Vec<f32> = view.iter().copied().collect();
        Ok(flat.chunks(shape[2]).map(<[f32]>::to_vec).collect())
    }
}

impl EmbeddingBackend for OnnxBackend {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn identity(&self) -> String {
        self.identity.clone()
    }

    fn token_count(&self, text: &str) -> Result<usize, EmbedError> {
        let enc = self.counter.encode(text, true).map_err(|e| EmbedError::TokenizationFailure(e.to_string()))?;
        Ok(enc.len())
    }

    fn embed(&self, text: &str) -> Result<Embedded, EmbedError> {
        let truncated = self.token_count(text)? > self.spec.max_tokens;
        let enc = self.tokenizer.encode(text, true).map_err(|e| EmbedError::TokenizationFailure(e.to_string()))?;
        let widen = |v: &[u32]| v.iter().map(|&x| i64::from(x)).collect::<Vec<i64>>();
        let ids = widen(enc.get_ids());
        let mask = widen(enc.get_attention_mask());
        let type_ids = widen(enc.get_type_ids());
        let tokens = self.infer(&ids, &mask, &type_ids)?;
        let pooled = pool_tokens(&tokens, &mask, self.spec.pooling)?;
        if pooled.dims() != self.dims {
            return Err(EmbedError::DimensionMismatch { expected: self.dims, found: pooled.dims() });
        }
        Ok(Embedded { vector: pooled, truncated })
    }
}

/// Builds [`OnnxBackend`]s from `<bundles_dir>/<identifier>`.
pub struct OnnxFactory;

impl BackendFactory for OnnxFactory {
    fn create(&self, spec: &ModelSpec, config: &AnalysisConfig) -> Result<Box<dyn EmbeddingBackend>, EmbedError> {
        let dir = config
            .bundle_dir(spec)
            .ok_or_else(|| EmbedError::ModelLoadFailure(format!("{}: models.bundles_dir is not set", spec.name)))?;
        if !dir.is_dir() {
            return Err(EmbedError::ModelLoadFailure(format!("{}: no bundle at {}", spec.name, dir.display())));
        }
        log::info!("loading {} from {}", spec.name, dir.display());
        Ok(Box::new(OnnxBackend::from_bundle(&dir, spec)?))
    }
}
