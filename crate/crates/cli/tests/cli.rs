use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap().flatten() {
        let p = e.path();
        if p.file_name().is_some_and(|n| n == "out") {
            continue;
        }
        if p.is_dir() {
            copy_dir(&p, &to.join(e.file_name()));
        } else {
            std::fs::copy(&p, to.join(e.file_name())).unwrap();
        }
    }
}

fn workspace() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    copy_dir(&root().join("demo"), tmp.path());
    tmp
}

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sts-influence"))
        .args(args)
        .current_dir(dir)
        .env_remove("STS_INFLUENCE_CACHE_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn edit(path: &Path, f: impl FnOnce(String) -> String) {
    let text = std::fs::read_to_string(path).unwrap();
    std::fs::write(path, f(text)).unwrap();
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    sts_influence::pipeline::artifact_files(dir)
        .into_iter()
        .map(|p| (p.clone(), std::fs::read(dir.join(p)).unwrap()))
        .collect()
}

/// Installs the tiny test encoder under the TinyBERT identifier.
fn install_tiny_bundle(ws: &Path) {
    let src = root().join("crates/onnx/tests/fixtures/tiny-bundle");
    let dst = ws.join("bundles/paraphrase-TinyBERT-L6-v2");
    copy_dir(&src, &dst);
    edit(&dst.join("manifest.json"), |t| t.replace("\"tiny-test-encoder\"", "\"paraphrase-TinyBERT-L6-v2\""));
    edit(&ws.join("analysis.toml"), |t| {
        t.replace("select = [\"reference\"]", "select = [\"reference\", \"TinyBERT\"]\nbundles_dir = \"bundles\"")
    });
}

#[test]
fn run_succeeds_and_prints_report_dir() {
    let ws = workspace();
    let out = cli(ws.path(), &["run", "--config", "analysis.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).trim_end().ends_with("report"));
    assert!(ws.path().join("out/report/report.json").is_file());
}

#[test]
fn stage_commands_compose_to_a_full_run() {
    let a = workspace();
    assert_eq!(code(&cli(a.path(), &["run"])), 0);
    let b = workspace();
    for stage in ["preprocess", "embed", "score", "ensemble", "report"] {
        let out = cli(b.path(), &[stage]);
        assert_eq!(code(&out), 0, "{stage}: {}", stderr(&out));
    }
    assert_eq!(snapshot(&a.path().join("out")), snapshot(&b.path().join("out")));
}

#[test]
fn reruns_are_byte_identical_at_any_thread_count() {
    let ws = workspace();
    install_tiny_bundle(ws.path());
    assert_eq!(code(&cli(ws.path(), &["run", "--threads", "1"])), 0);
    let first = snapshot(&ws.path().join("out"));
    assert!(first.iter().any(|(p, _)| p.ends_with("radar_lateral.svg")));
    for threads in ["1", "3", "8"] {
        let out = cli(ws.path(), &["run", "--threads", threads]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert_eq!(snapshot(&ws.path().join("out")), first, "threads = {threads}");
    }
}

#[test]
fn onnx_models_are_scored_alongside_the_reference() {
    let ws = workspace();
    install_tiny_bundle(ws.path());
    let out = cli(ws.path(), &["run"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(ws.path().join("out/report/table_provisions.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["model", "Reference", "TinyBERT", "Average", "Maximum", "Minimum", "Range"]);
    let svg = std::fs::read_to_string(ws.path().join("out/report/radar_provisions.svg")).unwrap();
    assert_eq!(svg.matches("class=\"series\"").count(), 2);
}

#[test]
fn score_before_embed_exits_1() {
    let ws = workspace();
    assert_eq!(code(&cli(ws.path(), &["preprocess"])), 0);
    let out = cli(ws.path(), &["score"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("missing upstream artifact"), "{}", stderr(&out));
}

#[test]
fn missing_annotation_file_exits_1() {
    let ws = workspace();
    std::fs::remove_file(ws.path().join("annotations.tsv")).unwrap();
    let out = cli(ws.path(), &["run"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("annotation file"), "{}", stderr(&out));
}

#[test]
fn precedence_failure_exits_1() {
    let ws = workspace();
    edit(&ws.path().join("corpus.toml"), |t| t.replace("start_year = -350\nend_year = -322", "start_year = 2030\nend_year = 2040"));
    let out = cli(ws.path(), &["run"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("precedence"), "{}", stderr(&out));
}

#[test]
fn bad_bundle_exits_1() {
    let ws = workspace();
    install_tiny_bundle(ws.path());
    edit(&ws.path().join("bundles/paraphrase-TinyBERT-L6-v2/manifest.json"), |t| t.replacen("0.", "9.", 1));
    let out = cli(ws.path(), &["run"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("parity"), "{}", stderr(&out));
}

#[test]
fn unwritable_output_exits_2() {
    let ws = workspace();
    std::fs::write(ws.path().join("blocker"), "").unwrap();
    let out = cli(ws.path(), &["run", "--output-dir", "blocker/out"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn unknown_model_and_bad_config_exit_1() {
    let ws = workspace();
    edit(&ws.path().join("analysis.toml"), |t| t.replace("\"reference\"", "\"GPT\""));
    assert_eq!(code(&cli(ws.path(), &["run"])), 1);
    assert_eq!(code(&cli(ws.path(), &["run", "--config", "nope.toml"])), 1);
}

#[test]
fn models_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["models", "list"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("all-MPNet-base-v2") && text.contains("term-frequency"));

    let out = cli(dir.path(), &["models", "list", "--json", "--family", "roberta"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["identifier"], "all-distilroberta-v1");

    assert_eq!(code(&cli(dir.path(), &["models", "list", "--family", "gpt"])), 1);
}

#[test]
fn cache_dir_from_environment() {
    let ws = workspace();
    let cache = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sts-influence"))
        .arg("run")
        .current_dir(ws.path())
        .env("STS_INFLUENCE_CACHE_DIR", cache.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let files: Vec<_> = std::fs::read_dir(cache.path()).unwrap().flatten().collect();
    assert_eq!(files.len(), 1);
    assert!(files[0].file_name().to_string_lossy().ends_with(".stscache"));
    assert!(!ws.path().join("out/cache").exists());
}
