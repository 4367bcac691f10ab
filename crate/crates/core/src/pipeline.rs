//! Stage orchestration over a run directory.
//!
//! ```text
//! <output_dir>/
//!   run_meta.json                 timestamps and cache statistics (not deterministic)
//!   preprocess/parts.json         segmented parts, preprocessing audit, precedence
//!   preprocess/texts/<doc>.txt    text that was segmented
//!   embed/embeddings.json         models and per-part matrix metadata
//!   embed/<model>/<part>.bin      embedding matrices
//!   score/scores.json             influence and lateral score tables
//!   score/matrices/...            sentence matrices, when enabled
//!   ensemble/ensemble.json        stats, votes and rankings
//!   report/                       CSV, JSON, SVG and markdown outputs
//! ```
//!
//! Every stage reads its inputs from the previous stage's artifacts, so a
//! full run and the stages run one by one produce the same files. Each
//! artifact records the config hash; a stage refuses inputs from another
//! configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AnalysisConfig, ConfigError};
use crate::corpus::{
    check_precedence, load_document, split_influencee, strip_structure, CorpusError, Document, DocumentPart, PartLabel,
    Sentence,
};
use crate::embed::{
    embed_sentences, read_matrix, write_matrix, EmbedError, EmbeddingBackend, EmbeddingCache, ModelSpec, ReferenceBackend,
    Vocabulary,
};
use crate::ensemble::{summarize, EnsembleError, EnsembleSummary, ScoreTable};
use crate::preprocess::{
    isolation_violations, preprocess_influencer, read_annotations, read_lexicon, Lexicons, PreprocessError,
    PreprocessReport, StructuralOptions,
};
use crate::report::{
    emit_all, file_stem, AnalysisReport, Caveats, ExclusionNote, PrecedenceCheck, ReportError, TruncationNote,
};
use crate::similarity::{score_documents, AggregationStrategy, DocumentScore, SimilarityError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Preprocess,
    Embed,
    Score,
    Ensemble,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Preprocess, Stage::Embed, Stage::Score, Stage::Ensemble, Stage::Report];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Embed => "embed",
            Stage::Score => "score",
            Stage::Ensemble => "ensemble",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("preprocess: {doc}: {source}")]
    Corpus { doc: String, source: CorpusError },
    #[error("preprocess: {doc}: {source}")]
    Preprocess { doc: String, source: PreprocessError },
    #[error(
        "preprocess: precedence precondition failed: {influencer} ({influencer_dates}) neither precedes nor overlaps {influencee} ({influencee_dates})"
    )]
    Precedence { influencer: String, influencer_dates: String, influencee: String, influencee_dates: String },
    #[error("embed: {model}: {source}")]
    Embed { model: String, source: EmbedError },
    #[error("score: {model}: {influencer} vs {target}: {source}")]
    Similarity { model: String, influencer: String, target: String, source: SimilarityError },
    #[error("{stage}: {source}")]
    Ensemble { stage: Stage, source: EnsembleError },
    #[error("report: {0}")]
    Report(#[from] ReportError),
    #[error("{stage}: missing upstream artifact {path}; run the earlier stages first")]
    MissingUpstreamArtifact { stage: Stage, path: PathBuf },
    #[error("{stage}: {path} was produced with a different configuration; rerun the earlier stages")]
    StaleArtifact { stage: Stage, path: PathBuf },
    #[error("{stage}: unreadable artifact {path}: {message}")]
    Artifact { stage: Stage, path: PathBuf, message: String },
    #[error("{stage}: io error on {path}: {source}")]
    Io { stage: Stage, path: PathBuf, source: std::io::Error },
    #[error("cannot start thread pool: {0}")]
    ThreadPool(String),
}

impl PipelineError {
    /// 1 for problems with the configuration or its inputs, 2 for failures
    /// while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::Corpus { .. }
            | PipelineError::Preprocess { .. }
            | PipelineError::Precedence { .. }
            | PipelineError::MissingUpstreamArtifact { .. }
            | PipelineError::StaleArtifact { .. } => 1,
            PipelineError::Embed { source, .. } => match source {
                EmbedError::UnknownModel(_) | EmbedError::Bundle { .. } | EmbedError::ModelLoadFailure(_) => 1,
                _ => 2,
            },
            PipelineError::Similarity { source, .. } => match source {
                SimilarityError::AllRowsZeroNorm { .. } => 1,
                _ => 2,
            },
            PipelineError::Ensemble { .. }
            | PipelineError::Report(_)
            | PipelineError::Artifact { .. }
            | PipelineError::Io { .. }
            | PipelineError::ThreadPool(_) => 2,
        }
    }
}

/// Builds transformer backends. The reference backend is built by the
/// pipeline itself because it depends on the run vocabulary.
pub trait BackendFactory: Sync {
    fn create(&self, spec: &ModelSpec, config: &AnalysisConfig) -> Result<Box<dyn EmbeddingBackend>, EmbedError>;
}

/// For builds without a transformer runtime.
pub struct ReferenceOnly;

impl BackendFactory for ReferenceOnly {
    fn create(&self, spec: &ModelSpec, _config: &AnalysisConfig) -> Result<Box<dyn EmbeddingBackend>, EmbedError> {
        Err(EmbedError::ModelLoadFailure(format!("{} needs a transformer runtime, which this build does not include", spec.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartRecord {
    pub part_id: String,
    pub doc_id: String,
    pub label: PartLabel,
    /// SHA-256 of the text the sentences were segmented from.
    pub content_sha256: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationHit {
    pub doc_id: String,
    pub term: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartsArtifact {
    pub config_hash: String,
    pub influencers: Vec<PartRecord>,
    pub influencee: Vec<PartRecord>,
    pub precedence: Vec<PrecedenceCheck>,
    pub preprocess_reports: Vec<PreprocessReport>,
    pub isolation_hits: Vec<IsolationHit>,
}

impl PartsArtifact {
    pub fn all_parts(&self) -> impl Iterator<Item = &PartRecord> {
        self.influencers.iter().chain(&self.influencee)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartEmbedding {
    pub part_id: String,
    pub file: String,
    pub rows: usize,
    pub dims: usize,
    pub truncated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEmbeddings {
    pub spec: ModelSpec,
    pub dir: String,
    pub parts: Vec<PartEmbedding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsArtifact {
    pub config_hash: String,
    pub models: Vec<ModelEmbeddings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresArtifact {
    pub config_hash: String,
    pub strategy: AggregationStrategy,
    pub influence: ScoreTable,
    pub lateral: Option<ScoreTable>,
    pub documents: Vec<DocumentScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleArtifact {
    pub config_hash: String,
    pub summary: EnsembleSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheStats {
    pub model: String,
    pub cache_hits: usize,
    pub backend_calls: usize,
}

/// Wall-clock and cache information for one invocation. Kept apart from the
/// deterministic artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub config_hash: String,
    pub stages: Vec<Stage>,
    pub threads: Option<usize>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub cache: Vec<CacheStats>,
}

pub const PARTS_JSON: &str = "preprocess/parts.json";
pub const EMBEDDINGS_JSON: &str = "embed/embeddings.json";
pub const SCORES_JSON: &str = "score/scores.json";
pub const ENSEMBLE_JSON: &str = "ensemble/ensemble.json";
pub const REPORT_DIR: &str = "report";
pub const RUN_META_JSON: &str = "run_meta.json";

/// A run directory bound to one configuration.
pub struct Run<'a> {
    pub config: &'a AnalysisConfig,
    pub dir: PathBuf,
    pub config_hash: String,
    factory: &'a dyn BackendFactory,
    cache_stats: Vec<CacheStats>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn io(stage: Stage, path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError {
    let path = path.to_path_buf();
    move |source| PipelineError::Io { stage, path, source }
}

fn write_file(stage: Stage, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io(stage, parent))?;
    }
    std::fs::write(path, bytes).map_err(io(stage, path))
}

fn write_json<T: Serialize>(stage: Stage, path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| PipelineError::Artifact { stage, path: path.to_path_buf(), message: e.to_string() })?;
    s.push('\n');
    write_file(stage, path, s.as_bytes())
}

/// Removes a stage's previous output so no stale file survives a rerun.
fn reset_dir(stage: Stage, dir: &Path) -> Result<(), PipelineError> {
    match std::fs::remove_dir_all(dir) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(io(stage, dir)(e)),
    }
    std::fs::create_dir_all(dir).map_err(io(stage, dir))
}

impl<'a> Run<'a> {
    pub fn new(config: &'a AnalysisConfig, factory: &'a dyn BackendFactory) -> Result<Self, PipelineError> {
        Ok(Self { config, dir: config.output_dir(), config_hash: config.config_hash()?, factory, cache_stats: Vec::new() })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn read_artifact<T: DeserializeOwned>(&self, stage: Stage, rel: &str, hash_of: impl Fn(&T) -> &str) -> Result<T, PipelineError> {
        let path = self.path(rel);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(PipelineError::MissingUpstreamArtifact { stage, path })
            }
            Err(e) => return Err(io(stage, &path)(e)),
        };
        let value: T = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Artifact { stage, path: path.clone(), message: e.to_string() })?;
        if hash_of(&value) != self.config_hash {
            return Err(PipelineError::StaleArtifact { stage, path });
        }
        Ok(value)
    }

    pub fn read_parts(&self, stage: Stage) -> Result<PartsArtifact, PipelineError> {
        self.read_artifact(stage, PARTS_JSON, |a: &PartsArtifact| &a.config_hash)
    }

    pub fn read_embeddings(&self, stage: Stage) -> Result<EmbeddingsArtifact, PipelineError> {
        self.read_artifact(stage, EMBEDDINGS_JSON, |a: &EmbeddingsArtifact| &a.config_hash)
    }

    pub fn read_scores(&self, stage: Stage) -> Result<ScoresArtifact, PipelineError> {
        self.read_artifact(stage, SCORES_JSON, |a: &ScoresArtifact| &a.config_hash)
    }

    pub fn read_ensemble(&self, stage: Stage) -> Result<EnsembleArtifact, PipelineError> {
        self.read_artifact(stage, ENSEMBLE_JSON, |a: &EnsembleArtifact| &a.config_hash)
    }

    /// Loads documents, checks precedence, preprocesses influencers, splits
    /// and segments the influencee.
    pub fn preprocess(&mut self) -> Result<PartsArtifact, PipelineError> {
        const S: Stage = Stage::Preprocess;
        let cfg = self.config;
        let manifest = cfg.manifest().map_err(|source| PipelineError::Corpus { doc: "corpus manifest".into(), source })?;
        let load = |e: &crate::corpus::ManifestEntry| {
            load_document(&e.path, e).map_err(|source| PipelineError::Corpus { doc: e.id.clone(), source })
        };
        let influencee = load(manifest.influencee())?;
        let influencers: Vec<Document> = manifest.influencers().map(load).collect::<Result<_, _>>()?;

        let mut precedence = Vec::new();
        for inf in &influencers {
            let relation = check_precedence(&inf.date_range, &influencee.date_range);
            let check = PrecedenceCheck {
                influencer: inf.id.clone(),
                influencee: influencee.id.clone(),
                influencer_dates: inf.date_range.to_string(),
                influencee_dates: influencee.date_range.to_string(),
                relation,
            };
            if !relation.valid_for_influence {
                if cfg.run.strict_precedence {
                    return Err(PipelineError::Precedence {
                        influencer: check.influencer,
                        influencer_dates: check.influencer_dates,
                        influencee: check.influencee,
                        influencee_dates: check.influencee_dates,
                    });
                }
                log::warn!("{} does not precede or overlap {}", inf.id, influencee.id);
            }
            precedence.push(check);
        }

        let mut spans = Vec::new();
        for p in &cfg.preprocess.annotations {
            let path = cfg.resolve(p);
            spans.extend(read_annotations(&path).map_err(|source| PipelineError::Preprocess { doc: path.display().to_string(), source })?);
        }
        let known: BTreeSet<&str> = influencers.iter().map(|d| d.id.as_str()).collect();
        if let Some(s) = spans.iter().find(|s| !known.contains(s.doc_id.as_str())) {
            return Err(PipelineError::Preprocess {
                doc: s.doc_id.clone(),
                source: PreprocessError::InvalidSpan { doc: s.doc_id.clone(), reason: "annotation names no influencer in the corpus".into() },
            });
        }
        let mut entries = Vec::new();
        for p in &cfg.preprocess.lexicons {
            let path = cfg.resolve(p);
            entries.extend(read_lexicon(&path).map_err(|source| PipelineError::Preprocess { doc: path.display().to_string(), source })?);
        }
        let lexicons = Lexicons::from_entries(entries).map_err(|source| PipelineError::Preprocess { doc: "lexicon".into(), source })?;

        let out = self.path("preprocess");
        reset_dir(S, &out)?;
        let options = StructuralOptions::default();
        let mut records = Vec::new();
        let mut reports = Vec::new();
        let mut isolation_hits = Vec::new();
        for doc in &influencers {
            let (text, report) = preprocess_influencer(doc, &spans, &lexicons, &options)
                .map_err(|source| PipelineError::Preprocess { doc: doc.id.clone(), source })?;
            if let Some(terms) = cfg.preprocess.blocklist.get(&doc.id) {
                for (term, offset) in isolation_violations(&text, terms) {
                    log::warn!("{}: blocklisted term {term:?} remains at byte {offset}", doc.id);
                    isolation_hits.push(IsolationHit { doc_id: doc.id.clone(), term, offset });
                }
            }
            let part = DocumentPart::whole(&doc.id, &text).map_err(|source| PipelineError::Corpus { doc: doc.id.clone(), source })?;
            write_file(S, &out.join("texts").join(format!("{}.txt", file_stem(&doc.id))), text.as_bytes())?;
            records.push(part_record(part, &text));
            reports.push(report);
        }

        let mut target_doc = influencee.clone();
        if cfg.run.strip_structure {
            target_doc.raw_text = strip_structure(&influencee.raw_text);
        }
        let text = target_doc.raw_text.clone();
        let parts = if cfg.corpus.split {
            let (pre, prov) = split_influencee(&target_doc, cfg.split_marker())
                .map_err(|source| PipelineError::Corpus { doc: target_doc.id.clone(), source })?;
            vec![pre, prov]
        } else {
            vec![DocumentPart::whole(&target_doc.id, &text).map_err(|source| PipelineError::Corpus { doc: target_doc.id.clone(), source })?]
        };
        write_file(S, &out.join("texts").join(format!("{}.txt", file_stem(&target_doc.id))), text.as_bytes())?;

        let artifact = PartsArtifact {
            config_hash: self.config_hash.clone(),
            influencers: records,
            influencee: parts.into_iter().map(|p| part_record(p, &text)).collect(),
            precedence,
            preprocess_reports: reports,
            isolation_hits,
        };
        write_json(S, &self.path(PARTS_JSON), &artifact)?;
        Ok(artifact)
    }

    /// Embeds every part with every selected model.
    pub fn embed(&mut self) -> Result<EmbeddingsArtifact, PipelineError> {
        const S: Stage = Stage::Embed;
        let parts = self.read_parts(S)?;
        let specs = self.config.model_specs()?;
        let out = self.path("embed");
        reset_dir(S, &out)?;
        let cache_dir = self.config.cache_dir();
        let mut models = Vec::new();
        for spec in specs {
            let err = |source| PipelineError::Embed { model: spec.name.clone(), source };
            let backend: Box<dyn EmbeddingBackend> = if spec.is_reference() {
                let vocab = Vocabulary::from_texts(parts.all_parts().flat_map(|p| p.sentences.iter().map(|s| s.text.as_str())));
                Box::new(ReferenceBackend::with_max_tokens(vocab, spec.max_tokens).map_err(err)?)
            } else {
                self.factory.create(&spec, self.config).map_err(err)?
            };
            let spec = backend.spec().clone();
            let cache = EmbeddingCache::new(backend.as_ref());
            let cache_path = cache_dir.join(cache.file_name());
            cache.load(&cache_path).map_err(err)?;
            let dir = file_stem(&spec.name);
            let mut stats = CacheStats { model: spec.name.clone(), cache_hits: 0, backend_calls: 0 };
            let mut records = Vec::new();
            for part in parts.all_parts() {
                let outcome = embed_sentences(backend.as_ref(), &part.part_id, &part.content_sha256, &part.sentences, &cache).map_err(err)?;
                stats.cache_hits += outcome.cache_hits;
                stats.backend_calls += outcome.backend_calls;
                let file = format!("{dir}/{}.bin", file_stem(&part.part_id));
                let path = out.join(&file);
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent).map_err(io(S, parent))?;
                }
                write_matrix(&path, &outcome.matrix).map_err(err)?;
                records.push(PartEmbedding {
                    part_id: part.part_id.clone(),
                    file,
                    rows: outcome.matrix.len(),
                    dims: outcome.matrix.dims,
                    truncated: outcome.truncated,
                });
            }
            if let Err(e) = cache.save(&cache_path) {
                log::warn!("could not save embedding cache: {e}");
            }
            log::info!("{}: {} cache hits, {} backend calls", spec.name, stats.cache_hits, stats.backend_calls);
            self.cache_stats.push(stats);
            models.push(ModelEmbeddings { spec, dir, parts: records });
        }
        let artifact = EmbeddingsArtifact { config_hash: self.config_hash.clone(), models };
        write_json(S, &self.path(EMBEDDINGS_JSON), &artifact)?;
        Ok(artifact)
    }

    /// Scores influencers against each influencee part, and influencers
    /// against each other.
    pub fn score(&mut self) -> Result<ScoresArtifact, PipelineError> {
        const S: Stage = Stage::Score;
        let parts = self.read_parts(S)?;
        let embeddings = self.read_embeddings(S)?;
        let strategy = self.config.scoring.strategy;
        let out = self.path("score");
        reset_dir(S, &out)?;

        let names: Vec<String> = embeddings.models.iter().map(|m| m.spec.name.clone()).collect();
        let influencer_ids: Vec<String> = parts.influencers.iter().map(|p| p.doc_id.clone()).collect();
        let targets: Vec<String> = parts.influencee.iter().map(|p| p.label.as_str().to_string()).collect();
        let table_err = |source| PipelineError::Ensemble { stage: S, source };
        let mut influence = ScoreTable::new(names.clone(), influencer_ids.clone(), targets).map_err(table_err)?;
        let lateral_on = self.config.scoring.lateral && influencer_ids.len() >= 2;
        let mut lateral = if lateral_on {
            Some(ScoreTable::new(names.clone(), influencer_ids.clone(), influencer_ids.clone()).map_err(table_err)?)
        } else {
            None
        };
        let mut documents = Vec::new();

        for model in &embeddings.models {
            let mut matrices = BTreeMap::new();
            for pe in &model.parts {
                let path = self.path("embed").join(&pe.file);
                if !path.is_file() {
                    return Err(PipelineError::MissingUpstreamArtifact { stage: S, path });
                }
                let m = read_matrix(&path, model.spec.clone(), &pe.part_id)
                    .map_err(|source| PipelineError::Embed { model: model.spec.name.clone(), source })?;
                matrices.insert(pe.part_id.clone(), m);
            }
            let get = |part_id: &str| {
                matrices.get(part_id).ok_or_else(|| PipelineError::MissingUpstreamArtifact {
                    stage: S,
                    path: self.path(EMBEDDINGS_JSON).join(part_id),
                })
            };
            let mut pairs: Vec<(&PartRecord, &PartRecord, bool)> = Vec::new();
            for a in &parts.influencers {
                for t in &parts.influencee {
                    pairs.push((a, t, false));
                }
            }
            if lateral_on {
                for (i, a) in parts.influencers.iter().enumerate() {
                    for b in &parts.influencers[i + 1..] {
                        pairs.push((a, b, true));
                    }
                }
            }
            for (a, b, is_lateral) in pairs {
                let (doc, matrix) = score_documents(get(&a.part_id)?, get(&b.part_id)?, strategy).map_err(|source| {
                    PipelineError::Similarity { model: model.spec.name.clone(), influencer: a.part_id.clone(), target: b.part_id.clone(), source }
                })?;
                if is_lateral {
                    lateral.as_mut().expect("lateral table").set(&model.spec.name, &a.doc_id, &b.doc_id, doc.score.percent).map_err(table_err)?;
                } else {
                    influence.set(&model.spec.name, &a.doc_id, b.label.as_str(), doc.score.percent).map_err(table_err)?;
                }
                if self.config.scoring.dump_matrices {
                    let file = out.join("matrices").join(&model.dir).join(format!("{}__{}.csv", file_stem(&a.part_id), file_stem(&b.part_id)));
                    write_file(S, &file, matrix.to_csv().as_bytes())?;
                }
                documents.push(doc);
            }
        }
        let artifact = ScoresArtifact { config_hash: self.config_hash.clone(), strategy, influence, lateral, documents };
        write_json(S, &self.path(SCORES_JSON), &artifact)?;
        Ok(artifact)
    }

    pub fn ensemble(&mut self) -> Result<EnsembleArtifact, PipelineError> {
        const S: Stage = Stage::Ensemble;
        let scores = self.read_scores(S)?;
        reset_dir(S, &self.path("ensemble"))?;
        let summary = summarize(&scores.influence, scores.lateral.as_ref()).map_err(|source| PipelineError::Ensemble { stage: S, source })?;
        let artifact = EnsembleArtifact { config_hash: self.config_hash.clone(), summary };
        write_json(S, &self.path(ENSEMBLE_JSON), &artifact)?;
        Ok(artifact)
    }

    pub fn report(&mut self) -> Result<AnalysisReport, PipelineError> {
        const S: Stage = Stage::Report;
        let parts = self.read_parts(S)?;
        let embeddings = self.read_embeddings(S)?;
        let scores = self.read_scores(S)?;
        let ensemble = self.read_ensemble(S)?;

        let mut caveats = Caveats::default();
        for m in &embeddings.models {
            for p in m.parts.iter().filter(|p| !p.truncated.is_empty()) {
                caveats.truncated.push(TruncationNote { model: m.spec.name.clone(), part: p.part_id.clone(), sentences: p.truncated.clone() });
            }
        }
        for d in scores.documents.iter().filter(|d| !d.excluded_rows.is_empty() || !d.excluded_cols.is_empty()) {
            caveats.excluded.push(ExclusionNote {
                model: d.model.clone(),
                influencer_part: d.influencer_part.clone(),
                target_part: d.target_part.clone(),
                excluded_rows: d.excluded_rows.clone(),
                excluded_cols: d.excluded_cols.clone(),
            });
        }
        for h in &parts.isolation_hits {
            caveats.notes.push(format!("{}: blocklisted term {:?} remains after preprocessing (byte {}).", h.doc_id, h.term, h.offset));
        }
        if self.config.scoring.lateral && scores.lateral.is_none() {
            caveats.notes.push("Lateral scores need at least two influencers; none computed.".into());
        }

        let report = AnalysisReport::build(
            self.config_hash.clone(),
            scores.strategy,
            scores.influence,
            scores.lateral,
            parts.precedence,
            caveats,
        )?;
        if report.summary != ensemble.summary {
            return Err(PipelineError::StaleArtifact { stage: S, path: self.path(ENSEMBLE_JSON) });
        }
        let dir = self.path(REPORT_DIR);
        reset_dir(S, &dir)?;
        emit_all(&report, &dir)?;
        Ok(report)
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<(), PipelineError> {
        match stage {
            Stage::Preprocess => self.preprocess().map(drop),
            Stage::Embed => self.embed().map(drop),
            Stage::Score => self.score().map(drop),
            Stage::Ensemble => self.ensemble().map(drop),
            Stage::Report => self.report().map(drop),
        }
    }

    fn write_meta(&self, stages: &[Stage], started: f64) -> Result<(), PipelineError> {
        let meta = RunMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config_hash.clone(),
            stages: stages.to_vec(),
            threads: self.config.run.threads,
            started_unix: started,
            finished_unix: now(),
            cache: self.cache_stats.clone(),
        };
        write_json(stages.last().copied().unwrap_or(Stage::Report), &self.path(RUN_META_JSON), &meta)
    }
}

fn part_record(part: DocumentPart, source_text: &str) -> PartRecord {
    PartRecord {
        part_id: part.part_id,
        doc_id: part.parent_doc,
        label: part.label,
        content_sha256: crate::digest::sha256_hex(source_text.as_bytes()),
        sentences: part.sentences,
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
        return Ok(pool.install(f));
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(f())
}

/// Runs `stages` in order against the config's run directory and writes
/// `run_meta.json`.
pub fn run_stages(config: &AnalysisConfig, factory: &dyn BackendFactory, stages: &[Stage]) -> Result<(), PipelineError> {
    let started = now();
    with_threads(config.run.threads, || {
        let mut run = Run::new(config, factory)?;
        for &s in stages {
            log::info!("stage {s}");
            run.run_stage(s)?;
        }
        run.write_meta(stages, started)
    })?
}

/// The whole pipeline: preprocess, embed, score, ensemble, report.
pub fn run_all(config: &AnalysisConfig, factory: &dyn BackendFactory) -> Result<(), PipelineError> {
    run_stages(config, factory, &Stage::ALL)
}

/// Every deterministic file under the run directory, as paths relative to it.
pub fn artifact_files(dir: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        let Ok(entries) = std::fs::read_dir(dir) else { return };
        let mut entries: Vec<_> = entries.flatten().map(|e| e.path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else if let Ok(rel) = p.strip_prefix(root) {
                out.push(rel.to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.retain(|p| p != Path::new(RUN_META_JSON) && !p.starts_with("cache"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let user = PipelineError::MissingUpstreamArtifact { stage: Stage::Score, path: "x".into() };
        assert_eq!(user.exit_code(), 1);
        let runtime = PipelineError::Embed { model: "m".into(), source: EmbedError::InferenceFailure("boom".into()) };
        assert_eq!(runtime.exit_code(), 2);
        assert_eq!(PipelineError::Config(ConfigError::Version(3)).exit_code(), 1);
    }

    #[test]
    fn stage_names() {
        let names: Vec<&str> = Stage::ALL.iter().map(Stage::as_str).collect();
        assert_eq!(names, ["preprocess", "embed", "score", "ensemble", "report"]);
    }

    #[test]
    fn reference_only_rejects_transformers() {
        let spec = crate::embed::find_model("SBERT").unwrap();
        let cfg_text = "version = 1\n[corpus]\nmanifest = \"m.toml\"\n[run]\noutput_dir = \"o\"\n";
        let cfg = AnalysisConfig::parse(cfg_text, Path::new("c.toml")).unwrap();
        assert!(matches!(ReferenceOnly.create(&spec, &cfg), Err(EmbedError::ModelLoadFailure(_))));
    }
}
