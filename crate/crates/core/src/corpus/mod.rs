//! Document ingestion, influencee splitting, segmentation and precedence.

mod segment;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use segment::is_abbreviation;

/// Enacting formula that separates recitals from articles in EU regulations.
pub const DEFAULT_SPLIT_MARKER: &str = "HAVE ADOPTED THIS REGULATION:";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{0} is not valid UTF-8")]
    NotUtf8(PathBuf),
    #[error("document {0} is empty")]
    EmptyDocument(String),
    #[error("cannot segment empty text")]
    EmptyText,
    #[error("split marker {marker:?} not found in {doc}")]
    MarkerNotFound { doc: String, marker: String },
    #[error("split marker {marker:?} occurs {count} times in {doc}; expected exactly once")]
    MarkerAmbiguous { doc: String, marker: String, count: usize },
    #[error("document {0} is not an influencee")]
    NotInfluencee(String),
    #[error("{label} of {doc} has no sentences")]
    EmptyPart { doc: String, label: PartLabel },
    #[error("invalid date range {start}..{end}")]
    InvalidDateRange { start: i32, end: i32 },
    #[error("invalid corpus manifest: {0}")]
    Manifest(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Influencer,
    Influencee,
}

/// Inclusive span of years; negative years are BCE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDateRange")]
pub struct DateRange {
    start_year: i32,
    end_year: i32,
}

#[derive(Deserialize)]
struct RawDateRange {
    start_year: i32,
    end_year: i32,
}

impl TryFrom<RawDateRange> for DateRange {
    type Error = CorpusError;
    fn try_from(r: RawDateRange) -> Result<Self, Self::Error> {
        DateRange::new(r.start_year, r.end_year)
    }
}

impl DateRange {
    pub fn new(start_year: i32, end_year: i32) -> Result<Self, CorpusError> {
        if start_year > end_year {
            return Err(CorpusError::InvalidDateRange { start: start_year, end: end_year });
        }
        Ok(Self { start_year, end_year })
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn end_year(&self) -> i32 {
        self.end_year
    }

    pub fn intersects(&self, other: &DateRange) -> bool {
        self.start_year <= other.end_year && other.start_year <= self.end_year
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn year(y: i32) -> String {
            if y < 0 {
                format!("{} BCE", -y)
            } else {
                y.to_string()
            }
        }
        write!(f, "{}–{}", year(self.start_year), year(self.end_year))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub role: Role,
    pub date_range: DateRange,
    pub raw_text: String,
    pub source_path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartLabel {
    Preamble,
    Provisions,
    Whole,
}

impl PartLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PartLabel::Preamble => "preamble",
            PartLabel::Provisions => "provisions",
            PartLabel::Whole => "whole",
        }
    }
}

impl fmt::Display for PartLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sentence. `char_span` holds byte offsets into the text the sentence
/// was segmented from (for parts: the parent document's text).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub char_span: (usize, usize),
}

/// A contiguous, segmented slice of a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentPart {
    pub part_id: String,
    pub parent_doc: String,
    pub label: PartLabel,
    /// Byte range of the part within the parent text.
    pub span: (usize, usize),
    pub sentences: Vec<Sentence>,
}

impl DocumentPart {
    /// Segments the whole of `text` as a single part.
    pub fn whole(doc_id: &str, text: &str) -> Result<Self, CorpusError> {
        let sentences = segment_sentences(text)?;
        Ok(Self {
            part_id: format!("{doc_id}/{}", PartLabel::Whole),
            parent_doc: doc_id.to_string(),
            label: PartLabel::Whole,
            span: (0, text.len()),
            sentences,
        })
    }

    fn from_range(doc_id: &str, label: PartLabel, text: &str, start: usize, end: usize) -> Result<Self, CorpusError> {
        let sentences = segment::segment_at(&text[start..end], start);
        if sentences.is_empty() {
            return Err(CorpusError::EmptyPart { doc: doc_id.to_string(), label });
        }
        Ok(Self {
            part_id: format!("{doc_id}/{label}"),
            parent_doc: doc_id.to_string(),
            label,
            span: (start, end),
            sentences,
        })
    }

    pub fn sentence_texts(&self) -> Vec<&str> {
        self.sentences.iter().map(|s| s.text.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecedenceRelation {
    pub precedes: bool,
    pub overlaps: bool,
    pub valid_for_influence: bool,
}

/// One `[[document]]` record of a corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub title: String,
    pub role: Role,
    pub start_year: i32,
    pub end_year: i32,
    pub path: PathBuf,
}

impl ManifestEntry {
    pub fn date_range(&self) -> Result<DateRange, CorpusError> {
        DateRange::new(self.start_year, self.end_year)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    #[serde(rename = "document")]
    pub documents: Vec<ManifestEntry>,
}

impl CorpusManifest {
    /// Parses a TOML manifest and resolves relative document paths against
    /// the manifest's directory.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CorpusError::MissingFile(path.to_path_buf()),
            _ => CorpusError::Io { path: path.to_path_buf(), source: e },
        })?;
        let mut manifest: CorpusManifest =
            toml::from_str(&text).map_err(|e| CorpusError::Manifest(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut manifest.documents {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    /// Unique ids, well-formed dates, exactly one influencee and at least one
    /// influencer.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = BTreeSet::new();
        for d in &self.documents {
            if d.id.trim().is_empty() {
                return Err(CorpusError::Manifest("document with empty id".into()));
            }
            if !seen.insert(d.id.as_str()) {
                return Err(CorpusError::Manifest(format!("duplicate document id {:?}", d.id)));
            }
            d.date_range()?;
        }
        let influencees = self.documents.iter().filter(|d| d.role == Role::Influencee).count();
        if influencees != 1 {
            return Err(CorpusError::Manifest(format!("expected exactly one influencee, found {influencees}")));
        }
        if !self.documents.iter().any(|d| d.role == Role::Influencer) {
            return Err(CorpusError::Manifest("no influencer documents".into()));
        }
        Ok(())
    }

    pub fn influencers(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.documents.iter().filter(|d| d.role == Role::Influencer)
    }

    pub fn influencee(&self) -> &ManifestEntry {
        self.documents
            .iter()
            .find(|d| d.role == Role::Influencee)
            .expect("validated manifest has an influencee")
    }
}

/// Reads a document verbatim. A leading byte-order mark is dropped.
pub fn load_document(path: &Path, entry: &ManifestEntry) -> Result<Document, CorpusError> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::MissingFile(path.to_path_buf()),
        _ => CorpusError::Io { path: path.to_path_buf(), source: e },
    })?;
    let mut text = String::from_utf8(bytes).map_err(|_| CorpusError::NotUtf8(path.to_path_buf()))?;
    if text.starts_with('\u{FEFF}') {
        text.drain(..'\u{FEFF}'.len_utf8());
    }
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyDocument(entry.id.clone()));
    }
    Ok(Document {
        id: entry.id.clone(),
        title: entry.title.clone(),
        role: entry.role,
        date_range: entry.date_range()?,
        raw_text: text,
        source_path: path.to_path_buf(),
    })
}

/// Splits an influencee at the single occurrence of `marker`. The marker and
/// everything after it (annexes included) belong to the provisions.
pub fn split_influencee(doc: &Document, marker: &str) -> Result<(DocumentPart, DocumentPart), CorpusError> {
    if doc.role != Role::Influencee {
        return Err(CorpusError::NotInfluencee(doc.id.clone()));
    }
    let text = &doc.raw_text;
    let hits: Vec<usize> = if marker.is_empty() {
        Vec::new()
    } else {
        text.match_indices(marker).map(|(i, _)| i).collect()
    };
    match hits.len() {
        0 => Err(CorpusError::MarkerNotFound { doc: doc.id.clone(), marker: marker.to_string() }),
        1 => {
            let at = hits[0];
            let pre = DocumentPart::from_range(&doc.id, PartLabel::Preamble, text, 0, at)?;
            let prov = DocumentPart::from_range(&doc.id, PartLabel::Provisions, text, at, text.len())?;
            Ok((pre, prov))
        }
        count => Err(CorpusError::MarkerAmbiguous { doc: doc.id.clone(), marker: marker.to_string(), count }),
    }
}

/// Deterministic rule-based segmentation; spans are byte offsets into `text`.
pub fn segment_sentences(text: &str) -> Result<Vec<Sentence>, CorpusError> {
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyText);
    }
    Ok(segment::segment_at(text, 0))
}

pub fn check_precedence(influencer: &DateRange, influencee: &DateRange) -> PrecedenceRelation {
    let precedes = influencer.start_year < influencee.start_year;
    let overlaps = influencer.intersects(influencee);
    PrecedenceRelation { precedes, overlaps, valid_for_influence: precedes || overlaps }
}

/// Drops structural scaffolding from a legal text: markdown headings, lines
/// that only carry a structural label (`Article 5`, `CHAPTER III`,
/// `ANNEX IV`, `SECTION 2`, `TITLE I`) and leading paragraph numbers such as
/// `(12)` or `3.`.
pub fn strip_structure(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        let trimmed = body.trim();
        if trimmed.starts_with('#') || is_structural_label(trimmed) {
            continue;
        }
        let lead_ws = body.len() - body.trim_start().len();
        let rest = strip_paragraph_number(&body[lead_ws..]);
        out.push_str(&body[..lead_ws]);
        out.push_str(rest);
        out.push_str(&line[body.len()..]);
    }
    out
}

fn is_structural_label(line: &str) -> bool {
    let mut words = line.split_whitespace();
    let (Some(head), Some(num), None) = (words.next(), words.next(), words.next()) else {
        return false;
    };
    let head = head.to_lowercase();
    let is_num = num.chars().all(|c| c.is_ascii_digit() || c.is_ascii_lowercase())
        && num.chars().next().is_some_and(|c| c.is_ascii_digit());
    let is_roman = !num.is_empty() && num.chars().all(|c| "IVXLC".contains(c));
    matches!(head.as_str(), "article" | "chapter" | "annex" | "section" | "title") && (is_num || is_roman)
}

fn strip_paragraph_number(line: &str) -> &str {
    let digits = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
    if let Some(rest) = line.strip_prefix('(') {
        if let Some(close) = rest.find(')') {
            if digits(&rest[..close]) {
                return rest[close + 1..].trim_start();
            }
        }
    }
    if let Some(dot) = line.find(". ") {
        if digits(&line[..dot]) {
            return line[dot + 2..].trim_start();
        }
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn entry(role: Role) -> ManifestEntry {
        ManifestEntry {
            id: "doc".into(),
            title: "Doc".into(),
            role,
            start_year: 2020,
            end_year: 2024,
            path: PathBuf::from("unused"),
        }
    }

    fn influencee(text: &str) -> Document {
        Document {
            id: "act".into(),
            title: "Act".into(),
            role: Role::Influencee,
            date_range: DateRange::new(2020, 2024).unwrap(),
            raw_text: text.into(),
            source_path: PathBuf::new(),
        }
    }

    #[test]
    fn load_is_verbatim() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let body = "Para one.\n\nPara two.\n\nPara three.\n";
        f.write_all(body.as_bytes()).unwrap();
        let doc = load_document(f.path(), &entry(Role::Influencee)).unwrap();
        assert_eq!(doc.raw_text, body);
        assert_eq!(doc.role, Role::Influencee);
    }

    #[test]
    fn load_strips_bom() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"\xEF\xBB\xBFVirtue is a habit.").unwrap();
        let doc = load_document(f.path(), &entry(Role::Influencer)).unwrap();
        assert_eq!(doc.raw_text.as_bytes(), b"Virtue is a habit.");
    }

    #[test]
    fn load_errors() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(matches!(load_document(f.path(), &entry(Role::Influencer)), Err(CorpusError::EmptyDocument(_))));
        let mut g = tempfile::NamedTempFile::new().unwrap();
        g.write_all(&[0x66, 0xff, 0xfe]).unwrap();
        assert!(matches!(load_document(g.path(), &entry(Role::Influencer)), Err(CorpusError::NotUtf8(_))));
        assert!(matches!(
            load_document(Path::new("/nonexistent/x.txt"), &entry(Role::Influencer)),
            Err(CorpusError::MissingFile(_))
        ));
    }

    #[test]
    fn split_synthetic_fixture() {
        let doc = influencee("A. B. MARKER C. D.");
        let (pre, prov) = split_influencee(&doc, "MARKER").unwrap();
        assert_eq!(pre.sentence_texts(), ["A.", "B."]);
        assert_eq!(prov.sentence_texts(), ["MARKER C.", "D."]);
        assert_eq!(pre.label, PartLabel::Preamble);
        assert_eq!(prov.label, PartLabel::Provisions);
        assert!(pre.sentences.last().unwrap().char_span.1 <= prov.sentences[0].char_span.0);
    }

    #[test]
    fn split_act_like_text() {
        let text = "Whereas:\n\n(1) The purpose of this Regulation is trust.\n\n(2) Recital two.\n\nHAVE ADOPTED THIS REGULATION:\n\nArticle 1\n\nThis Regulation lays down rules.\n\nANNEX I\n\nList of legislation.\n";
        let (pre, prov) = split_influencee(&influencee(text), DEFAULT_SPLIT_MARKER).unwrap();
        assert!(pre.sentence_texts().iter().any(|s| s.contains("Recital two")));
        assert!(prov.sentence_texts().iter().any(|s| s.contains("lays down rules")));
        assert!(prov.sentence_texts().iter().any(|s| s.contains("List of legislation")));
        assert_eq!(prov.sentences[0].text, DEFAULT_SPLIT_MARKER);
    }

    #[test]
    fn split_marker_errors() {
        let doc = influencee("No marker here.");
        assert!(matches!(split_influencee(&doc, "MARKER"), Err(CorpusError::MarkerNotFound { .. })));
        let doc = influencee("MARKER one. MARKER two.");
        assert!(matches!(split_influencee(&doc, "MARKER"), Err(CorpusError::MarkerAmbiguous { count: 2, .. })));
        let mut inf = influencee("A. MARKER B.");
        inf.role = Role::Influencer;
        assert!(matches!(split_influencee(&inf, "MARKER"), Err(CorpusError::NotInfluencee(_))));
        let doc = influencee("MARKER at start.");
        assert!(matches!(split_influencee(&doc, "MARKER"), Err(CorpusError::EmptyPart { .. })));
    }

    #[test]
    fn segment_empty_text_errors() {
        assert!(matches!(segment_sentences("  \n"), Err(CorpusError::EmptyText)));
    }

    #[test]
    fn precedence_examples() {
        let virtue = DateRange::new(-380, 2021).unwrap();
        let act = DateRange::new(2020, 2024).unwrap();
        assert_eq!(
            check_precedence(&virtue, &act),
            PrecedenceRelation { precedes: true, overlaps: true, valid_for_influence: true }
        );
        let r = check_precedence(&DateRange::new(1930, 1940).unwrap(), &DateRange::new(1950, 1960).unwrap());
        assert_eq!(r, PrecedenceRelation { precedes: true, overlaps: false, valid_for_influence: true });
        let r = check_precedence(&DateRange::new(2025, 2026).unwrap(), &act);
        assert_eq!(r, PrecedenceRelation { precedes: false, overlaps: false, valid_for_influence: false });
    }

    #[test]
    fn date_range_rejects_inverted() {
        assert!(DateRange::new(10, 5).is_err());
        assert_eq!(DateRange::new(-380, 2021).unwrap().to_string(), "380 BCE–2021");
    }

    #[test]
    fn manifest_parsing_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.toml");
        std::fs::write(
            &path,
            r#"
[[document]]
id = "virtue"
title = "Virtue ethics"
role = "influencer"
start_year = -380
end_year = 2021
path = "virtue.md"

[[document]]
id = "act"
title = "Regulation"
role = "influencee"
start_year = 2020
end_year = 2024
path = "act.txt"
"#,
        )
        .unwrap();
        let m = CorpusManifest::load(&path).unwrap();
        assert_eq!(m.documents.len(), 2);
        assert_eq!(m.influencee().id, "act");
        assert_eq!(m.documents[0].path, dir.path().join("virtue.md"));

        let mut dup = m.clone();
        dup.documents[1].id = "virtue".into();
        assert!(dup.validate().is_err());
        let mut two = m.clone();
        two.documents[0].role = Role::Influencee;
        assert!(two.validate().is_err());
    }

    #[test]
    fn strip_structure_removes_labels_and_numbers() {
        let text = "CHAPTER II\nArticle 5\n1. The following practices shall be prohibited.\n(12) Whereas text.\nPlain line.\n";
        assert_eq!(strip_structure(text), "The following practices shall be prohibited.\nWhereas text.\nPlain line.\n");
        assert_eq!(strip_structure("Article five is cited."), "Article five is cited.");
    }
}
