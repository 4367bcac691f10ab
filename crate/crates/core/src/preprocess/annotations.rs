use serde::{Deserialize, Serialize};

use super::edits::{self, Edit};
use super::{rule, PreprocessError, RuleKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "lowercase")]
pub enum SpanAction {
    Delete,
    Replace(String),
    /// Rule 7: the span must exist but is left untouched.
    Keep,
}

/// A human-authored edit. `start..end` are Unicode scalar offsets into the
/// document text the span was written against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSpan {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub rule_id: u8,
    pub action: SpanAction,
    pub note: Option<String>,
}

impl AnnotationSpan {
    fn validate(&self) -> Result<(), PreprocessError> {
        let invalid = |reason: String| PreprocessError::InvalidSpan { doc: self.doc_id.clone(), reason };
        if self.start >= self.end {
            return Err(invalid(format!("empty or inverted span {}..{}", self.start, self.end)));
        }
        let kind = rule(self.rule_id).map(|r| r.kind);
        match (kind, &self.action) {
            (Some(RuleKind::KeepMarker), SpanAction::Keep) => Ok(()),
            (Some(RuleKind::KeepMarker), _) => Err(invalid("rule 7 spans must use the keep action".into())),
            (Some(RuleKind::Annotation), SpanAction::Keep) => {
                Err(invalid(format!("rule {} spans cannot use the keep action", self.rule_id)))
            }
            (Some(RuleKind::Annotation), _) => Ok(()),
            _ => Err(invalid(format!("rule {} is not an annotation rule", self.rule_id))),
        }
    }
}

/// Applies delete/replace spans to `text`. Spans are checked for bounds and
/// overlap first; keep spans are checked but do not change the text.
pub fn apply_annotations(text: &str, spans: &[AnnotationSpan]) -> Result<String, PreprocessError> {
    let doc = spans.first().map(|s| s.doc_id.as_str()).unwrap_or("");
    let refs: Vec<&AnnotationSpan> = spans.iter().collect();
    let edits = spans_to_edits(text, doc, &refs)?;
    let mut counts = Default::default();
    Ok(edits::apply(text, edits, &mut counts))
}

/// Validates spans and converts them to byte-offset edits. Keep spans take
/// part in the overlap check and are then dropped.
pub(crate) fn spans_to_edits(text: &str, doc: &str, spans: &[&AnnotationSpan]) -> Result<Vec<Edit>, PreprocessError> {
    for s in spans {
        s.validate()?;
    }
    let len = text.chars().count();
    let mut sorted: Vec<&AnnotationSpan> = spans.to_vec();
    sorted.sort_by_key(|s| (s.start, s.end));
    for s in &sorted {
        if s.end > len {
            return Err(PreprocessError::SpanOutOfBounds { doc: doc.to_string(), start: s.start, end: s.end, len });
        }
    }
    for w in sorted.windows(2) {
        if w[1].start < w[0].end {
            return Err(PreprocessError::OverlappingSpans {
                doc: doc.to_string(),
                first: (w[0].start, w[0].end),
                second: (w[1].start, w[1].end),
            });
        }
    }

    let byte_at = scalar_to_byte_offsets(text);
    Ok(sorted
        .into_iter()
        .filter_map(|s| {
            let replacement = match &s.action {
                SpanAction::Delete => String::new(),
                SpanAction::Replace(r) => r.clone(),
                SpanAction::Keep => return None,
            };
            Some(Edit { start: byte_at[s.start], end: byte_at[s.end], replacement, rule: s.rule_id })
        })
        .collect())
}

/// `v[i]` is the byte offset of the i-th scalar; `v[len]` is `text.len()`.
fn scalar_to_byte_offsets(text: &str) -> Vec<usize> {
    let mut v: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    v.push(text.len());
    v
}
