//! Browser bindings for three small operations: comparing two texts with the
//! term-frequency backend, summarising a pasted score table, and previewing
//! how a regulation is split and segmented.
//!
//! Every binding returns a JSON string; the `*_json` functions hold the logic
//! and run natively in tests.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sts_influence::corpus::{segment_sentences, split_influencee, strip_structure, DateRange, Document, Role};
use sts_influence::embed::{embed_sentences, EmbeddingCache, ReferenceBackend, Vocabulary};
use sts_influence::ensemble::{compute_stats, rank_influencers, vote, AggregateStats, ScoreTable, VoteResult};
use sts_influence::report::{render_radar_svg, RadarChartSpec};
use sts_influence::similarity::{score_documents, AggregationStrategy};

#[derive(Debug, Serialize)]
pub struct TextComparison {
    pub strategy: String,
    pub percent: f64,
    pub cosine: f64,
    pub sentences_a: Vec<String>,
    pub sentences_b: Vec<String>,
    /// Sentence-by-sentence cosine, rows from `a`, zero-norm sentences omitted.
    pub matrix: Vec<Vec<f64>>,
    pub excluded_a: Vec<usize>,
    pub excluded_b: Vec<usize>,
    pub vocabulary: usize,
}

#[derive(Debug, Serialize)]
pub struct TableSummary {
    pub target: String,
    pub stats: Vec<AggregateStats>,
    pub vote: VoteResult,
    pub ranking: Vec<String>,
    pub svg: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SplitPreview {
    pub preamble: Vec<String>,
    pub provisions: Vec<String>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Similarity of two texts: sentences are term-frequency vectors over the
/// words of both texts, aggregated with `strategy`.
pub fn compare_texts_json(a: &str, b: &str, strategy: &str) -> Result<String, String> {
    let strategy: AggregationStrategy = strategy.parse().map_err(|e| format!("{e}"))?;
    let sa = segment_sentences(a).map_err(|e| format!("text A: {e}"))?;
    let sb = segment_sentences(b).map_err(|e| format!("text B: {e}"))?;
    let vocab = Vocabulary::from_texts(sa.iter().chain(&sb).map(|s| s.text.as_str()));
    let vocabulary = vocab.len();
    let backend = ReferenceBackend::new(vocab).map_err(|_| "neither text contains any words".to_string())?;
    let cache = EmbeddingCache::new(&backend);
    let ma = embed_sentences(&backend, "a", "", &sa, &cache).map_err(|e| e.to_string())?.matrix;
    let mb = embed_sentences(&backend, "b", "", &sb, &cache).map_err(|e| e.to_string())?.matrix;
    let (doc, m) = score_documents(&ma, &mb, strategy).map_err(|e| e.to_string())?;
    to_json(&TextComparison {
        strategy: strategy.to_string(),
        percent: doc.score.percent,
        cosine: doc.score.cosine,
        sentences_a: sa.into_iter().map(|s| s.text).collect(),
        sentences_b: sb.into_iter().map(|s| s.text).collect(),
        matrix: (0..m.n_rows()).map(|i| m.row(i).to_vec()).collect(),
        excluded_a: doc.excluded_rows,
        excluded_b: doc.excluded_cols,
        vocabulary,
    })
}

/// Parses `model,<influencer>,...` CSV with one row of percentages per model.
pub fn parse_table(csv: &str, target: &str) -> Result<ScoreTable, String> {
    let mut lines = csv.lines().map(str::trim).filter(|l| !l.is_empty());
    let header: Vec<&str> = lines.next().ok_or("empty table")?.split(',').map(str::trim).collect();
    if header.len() < 3 {
        return Err("header needs a model column and at least two influencers".into());
    }
    let influencers = &header[1..];
    let mut models = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); influencers.len()];
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(format!("row {} has {} cells, expected {}", n + 2, cells.len(), header.len()));
        }
        models.push(cells[0]);
        for (c, cell) in cells[1..].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| format!("row {}: {cell:?} is not a number", n + 2))?;
            columns[c].push(v);
        }
    }
    if models.is_empty() {
        return Err("no model rows".into());
    }
    let cols: Vec<(&str, &[f64])> = influencers.iter().copied().zip(columns.iter().map(Vec::as_slice)).collect();
    ScoreTable::from_columns(&models, target, &cols).map_err(|e| e.to_string())
}

/// Statistics, vote, ranking and, for three or more influencers, a radar chart.
pub fn summarize_table_json(csv: &str, target: &str) -> Result<String, String> {
    let target = if target.trim().is_empty() { "target" } else { target.trim() };
    let table = parse_table(csv, target)?;
    let stats = compute_stats(&table).map_err(|e| e.to_string())?;
    let vote = vote(&table, target).map_err(|e| e.to_string())?;
    let ranking = rank_influencers(&stats, target);
    let svg = if table.influencers().len() >= 3 {
        let spec = RadarChartSpec::from_table(&table, target, target).map_err(|e| e.to_string())?;
        Some(render_radar_svg(&spec).map_err(|e| e.to_string())?)
    } else {
        None
    };
    to_json(&TableSummary { target: target.into(), stats, vote, ranking, svg })
}

/// Splits `text` at `marker` and segments both halves.
pub fn split_preview_json(text: &str, marker: &str, strip: bool) -> Result<String, String> {
    let raw_text = if strip { strip_structure(text) } else { text.to_string() };
    let doc = Document {
        id: "document".into(),
        title: String::new(),
        role: Role::Influencee,
        date_range: DateRange::new(0, 0).map_err(|e| e.to_string())?,
        raw_text,
        source_path: Default::default(),
    };
    let (pre, prov) = split_influencee(&doc, marker).map_err(|e| e.to_string())?;
    let texts = |p: sts_influence::DocumentPart| p.sentences.into_iter().map(|s| s.text).collect();
    to_json(&SplitPreview { preamble: texts(pre), provisions: texts(prov) })
}

#[wasm_bindgen(js_name = compareTexts)]
pub fn compare_texts(a: &str, b: &str, strategy: &str) -> Result<String, JsError> {
    compare_texts_json(a, b, strategy).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = summarizeTable)]
pub fn summarize_table(csv: &str, target: &str) -> Result<String, JsError> {
    summarize_table_json(csv, target).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = splitPreview)]
pub fn split_preview(text: &str, marker: &str, strip: bool) -> Result<String, JsError> {
    split_preview_json(text, marker, strip).map_err(|e| JsError::new(&e))
}
