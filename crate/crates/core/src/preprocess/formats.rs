//! Line-oriented annotation and lexicon files.
//!
//! Both formats are UTF-8, tab-separated, one record per line. The first line
//! is a version header; other lines starting with `#` and blank lines are
//! ignored. In free-text fields `\t`, `\n` and `\\` are escapes.
//!
//! Annotation file:
//!
//! ```text
//! #sts-annotations v1
//! # doc_id  start  end  rule  action  [replacement]  [note]
//! virtue	0	10	4	delete		proper noun
//! virtue	40	52	9	replace	a rival view
//! virtue	60	75	7	keep
//! ```
//!
//! Lexicon file:
//!
//! ```text
//! #sts-lexicon v1
//! # rule  source  replacement
//! 10	colour	color
//! 11	phronesis	practical wisdom
//! 12	eudaimonia	flourishing
//! ```

use std::path::Path;

use super::{AnnotationSpan, LexiconEntry, PreprocessError, SpanAction};

pub const ANNOTATION_HEADER: &str = "#sts-annotations v1";
pub const LEXICON_HEADER: &str = "#sts-lexicon v1";

fn unescape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn escape(field: &str) -> String {
    field.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

/// Yields `(line number, fields)` for every record line after the header.
fn records<'a>(
    text: &'a str,
    header: &str,
    source: &str,
) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>, PreprocessError> {
    let text = text.strip_prefix('\u{FEFF}').unwrap_or(text);
    let first = text.lines().next().unwrap_or("").trim_end();
    if first != header {
        return Err(PreprocessError::Format {
            source_name: source.to_string(),
            line: 1,
            message: format!("expected header {header:?}, found {first:?}"),
        });
    }
    Ok(text
        .lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').split('\t').collect())))
}

pub fn parse_annotations(text: &str, source: &str) -> Result<Vec<AnnotationSpan>, PreprocessError> {
    let err = |line: usize, message: String| PreprocessError::Format { source_name: source.to_string(), line, message };
    let mut out = Vec::new();
    for (line, f) in records(text, ANNOTATION_HEADER, source)? {
        if f.len() < 5 || f.len() > 7 {
            return Err(err(line, format!("expected 5 to 7 fields, found {}", f.len())));
        }
        let num = |i: usize, name: &str| -> Result<usize, PreprocessError> {
            f[i].trim().parse().map_err(|_| err(line, format!("{name} {:?} is not a non-negative integer", f[i])))
        };
        let start = num(1, "start")?;
        let end = num(2, "end")?;
        let rule_id: u8 = f[3].trim().parse().map_err(|_| err(line, format!("rule {:?} is not an integer", f[3])))?;
        let replacement = f.get(5).map(|s| unescape(s));
        let action = match f[4].trim() {
            "delete" => SpanAction::Delete,
            "keep" => SpanAction::Keep,
            "replace" => SpanAction::Replace(replacement.unwrap_or_default()),
            other => return Err(err(line, format!("unknown action {other:?}"))),
        };
        let note = f.get(6).map(|s| unescape(s)).filter(|s| !s.is_empty());
        out.push(AnnotationSpan { doc_id: f[0].trim().to_string(), start, end, rule_id, action, note });
    }
    Ok(out)
}

pub fn write_annotations(spans: &[AnnotationSpan]) -> String {
    let mut out = format!("{ANNOTATION_HEADER}\n");
    for s in spans {
        let (action, replacement) = match &s.action {
            SpanAction::Delete => ("delete", String::new()),
            SpanAction::Keep => ("keep", String::new()),
            SpanAction::Replace(r) => ("replace", escape(r)),
        };
        let note = s.note.as_deref().map(escape).unwrap_or_default();
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", s.doc_id, s.start, s.end, s.rule_id, action, replacement, note));
    }
    out
}

pub fn parse_lexicon(text: &str, source: &str) -> Result<Vec<LexiconEntry>, PreprocessError> {
    let mut out = Vec::new();
    for (line, f) in records(text, LEXICON_HEADER, source)? {
        if f.len() != 3 {
            return Err(PreprocessError::Format {
                source_name: source.to_string(),
                line,
                message: format!("expected 3 fields, found {}", f.len()),
            });
        }
        let rule_id: u8 = f[0].trim().parse().map_err(|_| PreprocessError::Format {
            source_name: source.to_string(),
            line,
            message: format!("rule {:?} is not an integer", f[0]),
        })?;
        out.push(LexiconEntry { source_term: unescape(f[1]), replacement: unescape(f[2]), rule_id });
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, PreprocessError> {
    std::fs::read_to_string(path).map_err(|source| PreprocessError::Io { path: path.to_path_buf(), source })
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationSpan>, PreprocessError> {
    parse_annotations(&read(path)?, &path.display().to_string())
}

pub fn read_lexicon(path: &Path) -> Result<Vec<LexiconEntry>, PreprocessError> {
    parse_lexicon(&read(path)?, &path.display().to_string())
}
