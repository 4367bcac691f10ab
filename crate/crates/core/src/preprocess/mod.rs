//! Influencer preprocessing.
//!
//! Twelve rules are applied in a fixed order:
//!
//! | ids      | kind        | mechanism                                    |
//! |----------|-------------|----------------------------------------------|
//! | 1, 2, 3  | structural  | markdown headings and named sections         |
//! | 4–6, 8, 9| annotation  | human-authored spans (delete / replace)      |
//! | 7        | keep marker | spans that are validated but never modified  |
//! | 10–12    | lexical     | spelling and foreign-term lexicons           |
//!
//! Annotation offsets are Unicode scalar offsets into the raw document text,
//! so structural and annotation edits form one edit set over the raw text.
//! The influencee is never preprocessed.

mod annotations;
mod edits;
mod formats;
mod lexicon;
mod structural;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Role};
use crate::digest::sha256_hex;

pub use annotations::{apply_annotations, AnnotationSpan, SpanAction};
pub use formats::{parse_annotations, parse_lexicon, read_annotations, read_lexicon, write_annotations};
pub use lexicon::{find_terms, normalize_spelling, replace_foreign_terms, Lexicon, LexiconEntry};
pub use structural::{apply_structural_rules, StructuralOptions};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("span {start}..{end} is out of bounds for {doc} ({len} characters)")]
    SpanOutOfBounds { doc: String, start: usize, end: usize, len: usize },
    #[error("spans {first:?} and {second:?} overlap in {doc}")]
    OverlappingSpans { doc: String, first: (usize, usize), second: (usize, usize) },
    #[error("invalid span in {doc}: {reason}")]
    InvalidSpan { doc: String, reason: String },
    #[error("document {0} is an influencee; influencee text is used without modification")]
    PolicyViolation(String),
    #[error("{source_name}:{line}: {message}")]
    Format { source_name: String, line: usize, message: String },
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("io error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleKind {
    Structural,
    Annotation,
    KeepMarker,
    Lexical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessRule {
    pub id: u8,
    pub kind: RuleKind,
    pub description: &'static str,
}

pub const RULES: [PreprocessRule; 12] = [
    PreprocessRule { id: 1, kind: RuleKind::Structural, description: "drop headings: titles, subtitles and similar labels" },
    PreprocessRule { id: 2, kind: RuleKind::Structural, description: "drop meta sections describing the document itself (contents, abstract, keywords)" },
    PreprocessRule { id: 3, kind: RuleKind::Structural, description: "drop the reference list" },
    PreprocessRule { id: 4, kind: RuleKind::Annotation, description: "drop proper nouns" },
    PreprocessRule { id: 5, kind: RuleKind::Annotation, description: "drop passages on what the theory is not, keeping negative examples" },
    PreprocessRule { id: 6, kind: RuleKind::Annotation, description: "reduce incremental arguments to their conclusions" },
    PreprocessRule { id: 7, kind: RuleKind::KeepMarker, description: "keep comparisons between variants of the same theory" },
    PreprocessRule { id: 8, kind: RuleKind::Annotation, description: "drop references to religions and religious symbols" },
    PreprocessRule { id: 9, kind: RuleKind::Annotation, description: "drop descriptions of, references to and comparisons with other theories" },
    PreprocessRule { id: 10, kind: RuleKind::Lexical, description: "normalize spelling to US English" },
    PreprocessRule { id: 11, kind: RuleKind::Lexical, description: "replace foreign-language words with their US English equivalent" },
    PreprocessRule { id: 12, kind: RuleKind::Lexical, description: "append an English gloss to foreign-language words without an equivalent" },
];

pub fn rule(id: u8) -> Option<&'static PreprocessRule> {
    RULES.iter().find(|r| r.id == id)
}

/// Per-rule audit counters. `removed_chars` is net: a rule that lengthens the
/// text (a gloss, a longer replacement) contributes a negative amount.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCount {
    pub edits: u64,
    pub removed_chars: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub doc_id: String,
    pub rule_counts: BTreeMap<u8, RuleCount>,
    /// Annotation spans that fell entirely inside a structurally removed region.
    pub superseded_spans: usize,
    pub input_chars: usize,
    pub output_chars: usize,
    pub input_sha256: String,
    pub output_sha256: String,
}

impl PreprocessReport {
    pub fn total_removed(&self) -> i64 {
        self.rule_counts.values().map(|c| c.removed_chars).sum()
    }
}

/// Lexicons for rules 10–12, as loaded from lexicon files.
#[derive(Debug, Clone, Default)]
pub struct Lexicons {
    pub spelling: Lexicon,
    pub foreign: Lexicon,
}

impl Lexicons {
    /// Splits a mixed entry list by rule id and validates it.
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Self, PreprocessError> {
        let (spelling, foreign): (Vec<_>, Vec<_>) = entries.into_iter().partition(|e| e.rule_id == 10);
        let all = Lexicon::new(spelling.iter().chain(foreign.iter()).cloned().collect())?;
        all.check_idempotent()?;
        Ok(Self { spelling: Lexicon::new(spelling)?, foreign: Lexicon::new(foreign)? })
    }
}

/// Applies rules 1 → 12 to an influencer and returns the text with its audit
/// report. Only spans whose `doc_id` matches the document are used.
pub fn preprocess_influencer(
    doc: &Document,
    spans: &[AnnotationSpan],
    lexicons: &Lexicons,
    options: &StructuralOptions,
) -> Result<(String, PreprocessReport), PreprocessError> {
    if doc.role != Role::Influencer {
        return Err(PreprocessError::PolicyViolation(doc.id.clone()));
    }
    let raw = doc.raw_text.as_str();
    let mut counts: BTreeMap<u8, RuleCount> = BTreeMap::new();

    let structural = structural::structural_edits(raw, options);
    let own: Vec<&AnnotationSpan> = spans.iter().filter(|s| s.doc_id == doc.id).collect();
    let annotation = annotations::spans_to_edits(raw, &doc.id, &own)?;
    let (annotation, superseded) = edits::drop_superseded(&doc.id, &structural, annotation)?;

    let mut all = structural;
    all.extend(annotation);
    let after_spans = edits::apply(raw, all, &mut counts);
    let after_spelling = lexicon::apply_counted(&after_spans, &lexicons.spelling, &mut counts);
    let output = lexicon::apply_counted(&after_spelling, &lexicons.foreign, &mut counts);

    let report = PreprocessReport {
        doc_id: doc.id.clone(),
        rule_counts: counts,
        superseded_spans: superseded,
        input_chars: raw.chars().count(),
        output_chars: output.chars().count(),
        input_sha256: sha256_hex(raw.as_bytes()),
        output_sha256: sha256_hex(output.as_bytes()),
    };
    Ok((output, report))
}

/// Whole-word, case-insensitive search for cross-theory names that should
/// have been removed by rule 9. Returns each hit as `(term, byte offset)`.
pub fn isolation_violations(text: &str, blocklist: &[String]) -> Vec<(String, usize)> {
    find_terms(text, blocklist)
}
