use std::path::{Path, PathBuf};

use sts_influence::embed::{BundleManifest, EmbedError, EmbeddingBackend, ModelFamily, Pooling};
use sts_influence_onnx::OnnxBackend;

fn bundle() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny-bundle")
}

fn copy_bundle(to: &Path) {
    for f in ["manifest.json", "model.onnx", "tokenizer.json"] {
        std::fs::copy(bundle().join(f), to.join(f)).unwrap();
    }
}

#[test]
fn matches_recorded_vectors() {
    let backend = OnnxBackend::load(&bundle()).unwrap();
    let manifest = BundleManifest::load(&bundle()).unwrap();
    for (fixture, report) in manifest.parity.iter().zip(backend.parity(&manifest).unwrap()) {
        assert!(report.max_delta < 1e-4, "{} differs by {}", fixture.sentence, report.max_delta);
        assert!(report.cosine > 0.99999);
    }
    assert_eq!(backend.dims(), 8);
    assert_eq!(backend.spec().family, ModelFamily::Custom);
}

#[test]
fn truncation_keeps_special_tokens_and_is_reported() {
    let backend = OnnxBackend::load(&bundle()).unwrap();
    let long = "Virtue and duty guide the moral agent toward good action.";
    assert_eq!(backend.token_count(long).unwrap(), 13);
    assert!(backend.embed(long).unwrap().truncated);
    assert!(!backend.embed("The law is clear.").unwrap().truncated);
}

#[test]
fn embeddings_are_repeatable() {
    let backend = OnnxBackend::load(&bundle()).unwrap();
    let a = backend.embed("Rules guide the good agent.").unwrap();
    let b = backend.embed("Rules guide the good agent.").unwrap();
    assert_eq!(a.vector.values(), b.vector.values());
    assert_eq!(backend.identity(), OnnxBackend::load(&bundle()).unwrap().identity());
}

#[test]
fn tampered_parity_vector_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    let path = dir.path().join("manifest.json");
    let mut m: BundleManifest = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    m.parity[0].vector[0] += 0.01;
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let err = OnnxBackend::load(dir.path()).err().expect("parity failure");
    assert!(matches!(err, EmbedError::Bundle { .. }), "{err}");
    assert!(err.to_string().contains("parity"));
}

#[test]
fn cls_pooling_fails_mean_pooled_parity() {
    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    let path = dir.path().join("manifest.json");
    let mut m: BundleManifest = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    m.pooling = Pooling::Cls;
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    // The recorded vectors are mean-pooled, so the CLS bundle fails parity.
    assert!(OnnxBackend::load(dir.path()).is_err());
}

#[test]
fn bundle_for_another_model_is_rejected() {
    let spec = sts_influence::embed::find_model("SBERT").unwrap();
    let err = OnnxBackend::from_bundle(&bundle(), &spec).err().expect("identifier mismatch");
    assert!(matches!(err, EmbedError::Bundle { .. }));
}
