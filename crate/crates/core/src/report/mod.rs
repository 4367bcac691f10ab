//! Tables, JSON, radar charts and a markdown summary for a finished run.
//!
//! Everything here is a pure function of the [`AnalysisReport`]; wall-clock
//! data belongs in a sidecar written by the caller. CSV, SVG and markdown use
//! two-decimal rounding; JSON keeps full precision so it parses back exactly.

mod radar;
mod rounding;
mod summary;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PrecedenceRelation;
use crate::digest::sha256_hex;
use crate::ensemble::{summarize, EnsembleError, EnsembleSummary, ScoreTable};
use crate::similarity::AggregationStrategy;

pub use radar::{render_radar_svg, RadarChartSpec, RadarSeries};
pub use rounding::{fmt2, round2};
pub use summary::render_summary;

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_JSON: &str = "report.json";
pub const SUMMARY_MD: &str = "summary.md";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("a radar chart needs at least 3 axes, found {0}")]
    TooFewAxes(usize),
    #[error("series {series} has {found} values for {expected} axes")]
    SeriesLength { series: String, expected: usize, found: usize },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecedenceCheck {
    pub influencer: String,
    pub influencee: String,
    pub influencer_dates: String,
    pub influencee_dates: String,
    pub relation: PrecedenceRelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationNote {
    pub model: String,
    pub part: String,
    pub sentences: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionNote {
    pub model: String,
    pub influencer_part: String,
    pub target_part: String,
    pub excluded_rows: Vec<usize>,
    pub excluded_cols: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Caveats {
    pub truncated: Vec<TruncationNote>,
    pub excluded: Vec<ExclusionNote>,
    pub notes: Vec<String>,
}

impl Caveats {
    pub fn is_empty(&self) -> bool {
        self.truncated.is_empty() && self.excluded.is_empty() && self.notes.is_empty()
    }
}

/// How lateral averages compare with influence averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateralComparison {
    pub lowest_lateral_average: f64,
    pub highest_influence_average: f64,
    pub mean_lateral_average: f64,
    pub mean_influence_average: f64,
    /// Every lateral pair average is above every influence average.
    pub lateral_exceeds_influence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub models: Vec<String>,
    pub strategy: AggregationStrategy,
    pub influence: ScoreTable,
    pub lateral_table: Option<ScoreTable>,
    pub summary: EnsembleSummary,
    pub lateral_comparison: Option<LateralComparison>,
    pub precedence: Vec<PrecedenceCheck>,
    pub caveats: Caveats,
    /// Other artifacts emitted alongside the JSON document.
    pub files: Vec<FileDigest>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl AnalysisReport {
    pub fn build(
        config_hash: String,
        strategy: AggregationStrategy,
        influence: ScoreTable,
        lateral_table: Option<ScoreTable>,
        precedence: Vec<PrecedenceCheck>,
        caveats: Caveats,
    ) -> Result<Self, ReportError> {
        let summary = summarize(&influence, lateral_table.as_ref())?;
        let lateral_comparison = summary.lateral.as_ref().map(|l| {
            let lat: Vec<f64> = l.pairs.iter().map(|p| p.stats.average).collect();
            let inf: Vec<f64> = summary.targets.iter().flat_map(|t| t.stats.iter().map(|s| s.average)).collect();
            let lowest = lat.iter().copied().fold(f64::INFINITY, f64::min);
            let highest = inf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            LateralComparison {
                lowest_lateral_average: lowest,
                highest_influence_average: highest,
                mean_lateral_average: mean(&lat),
                mean_influence_average: mean(&inf),
                lateral_exceeds_influence: lowest > highest,
            }
        });
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            config_hash,
            models: influence.models().to_vec(),
            strategy,
            influence,
            lateral_table,
            summary,
            lateral_comparison,
            precedence,
            caveats,
            files: Vec::new(),
        })
    }

    pub fn precedence_failures(&self) -> Vec<&PrecedenceCheck> {
        self.precedence.iter().filter(|p| !p.relation.valid_for_influence).collect()
    }
}

/// Lowercase ASCII letters, digits, `-` and `_`; anything else becomes `_`.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn stats_rows(out: &mut String, stats: &[&crate::ensemble::AggregateStats]) {
    type Pick = fn(&crate::ensemble::AggregateStats) -> f64;
    let rows: [(&str, Pick); 4] =
        [("Average", |s| s.average), ("Maximum", |s| s.maximum), ("Minimum", |s| s.minimum), ("Range", |s| s.range)];
    for (label, pick) in rows {
        out.push_str(label);
        for s in stats {
            out.push(',');
            out.push_str(&fmt2(pick(s)));
        }
        out.push('\n');
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Model rows by influencer columns for one target, followed by the four
/// statistics rows.
pub fn render_target_csv(report: &AnalysisReport, target: &str) -> Result<String, ReportError> {
    let table = &report.influence;
    let candidates = table.candidates(target);
    let columns: Vec<Vec<f64>> = candidates.iter().map(|c| table.column(c, target)).collect::<Result<_, _>>()?;
    let summary = report
        .summary
        .targets
        .iter()
        .find(|t| t.target == target)
        .ok_or_else(|| EnsembleError::UnknownName { kind: "target", name: target.to_string() })?;
    let mut out = String::from("model");
    for c in &candidates {
        out.push(',');
        out.push_str(&csv_field(c));
    }
    out.push('\n');
    for (m, model) in table.models().iter().enumerate() {
        out.push_str(&csv_field(model));
        for col in &columns {
            out.push(',');
            out.push_str(&fmt2(col[m]));
        }
        out.push('\n');
    }
    let stats: Vec<_> = candidates.iter().filter_map(|c| summary.stats.iter().find(|s| &s.influencer == *c)).collect();
    stats_rows(&mut out, &stats);
    Ok(out)
}

pub fn render_lateral_csv(report: &AnalysisReport) -> Option<String> {
    let l = report.summary.lateral.as_ref()?;
    let mut out = String::from("model");
    for p in &l.pairs {
        out.push(',');
        out.push_str(&csv_field(&format!("{} vs {}", p.a, p.b)));
    }
    out.push('\n');
    for (m, model) in l.models.iter().enumerate() {
        out.push_str(&csv_field(model));
        for p in &l.pairs {
            out.push(',');
            out.push_str(&fmt2(p.scores[m]));
        }
        out.push('\n');
    }
    let stats: Vec<_> = l.pairs.iter().map(|p| &p.stats).collect();
    stats_rows(&mut out, &stats);
    Some(out)
}

/// Every artifact as `(file name, contents)`, JSON last. Nothing is written,
/// so any error surfaces before the output directory is touched.
pub fn render_all(report: &AnalysisReport) -> Result<Vec<(String, String)>, ReportError> {
    let mut files = Vec::new();
    let mut report = report.clone();
    for target in report.influence.targets() {
        files.push((format!("table_{}.csv", file_stem(target)), render_target_csv(&report, target)?));
    }
    if let Some(csv) = render_lateral_csv(&report) {
        files.push(("table_lateral.csv".to_string(), csv));
    }
    for target in report.influence.targets().to_vec() {
        let spec = RadarChartSpec::from_table(&report.influence, &target, &format!("Similarity to {target}"))?;
        match render_radar_svg(&spec) {
            Ok(svg) => files.push((format!("radar_{}.svg", file_stem(&target)), svg)),
            Err(ReportError::TooFewAxes(n)) => {
                report.caveats.notes.push(format!("No radar chart for {target}: {n} influencers, at least 3 needed."))
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(l) = &report.summary.lateral {
        let spec = RadarChartSpec::from_lateral(l, "Lateral similarity between influencers");
        match render_radar_svg(&spec) {
            Ok(svg) => files.push(("radar_lateral.svg".to_string(), svg)),
            Err(ReportError::TooFewAxes(n)) => {
                report.caveats.notes.push(format!("No lateral radar chart: {n} pairs, at least 3 needed."))
            }
            Err(e) => return Err(e),
        }
    }
    files.push((SUMMARY_MD.to_string(), render_summary(&report)));
    report.files = files.iter().map(|(name, body)| FileDigest { name: name.clone(), sha256: sha256_hex(body.as_bytes()) }).collect();
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    files.push((REPORT_JSON.to_string(), json));
    Ok(files)
}

fn write(path: &Path, body: &str) -> Result<(), ReportError> {
    std::fs::write(path, body).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// Writes every artifact into `dir` and returns their paths.
pub fn emit_all(report: &AnalysisReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let files = render_all(report)?;
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        write(&path, &body)?;
        out.push(path);
    }
    Ok(out)
}

/// CSV tables and the JSON document only.
pub fn emit_tables(report: &AnalysisReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let files = render_all(report)?;
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (name, body) in files.into_iter().filter(|(n, _)| n.ends_with(".csv") || n == REPORT_JSON) {
        let path = dir.join(name);
        write(&path, &body)?;
        out.push(path);
    }
    Ok(out)
}

pub fn emit_radar_svg(spec: &RadarChartSpec, path: &Path) -> Result<(), ReportError> {
    write(path, &render_radar_svg(spec)?)
}

pub fn emit_summary(report: &AnalysisReport, path: &Path) -> Result<(), ReportError> {
    write(path, &render_summary(report))
}

pub fn read_report(path: &Path) -> Result<AnalysisReport, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
    Ok(serde_json::from_str(&text)?)
}
