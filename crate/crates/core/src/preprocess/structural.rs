//! Rules 1–3 over markdown-style text.
//!
//! A heading is an ATX line (`#`, `##`, ...). A heading whose title names a
//! meta section (rule 2) or a reference section (rule 3) is removed together
//! with its body, which runs until the next heading of the same or a higher
//! level. Every other heading is removed on its own (rule 1), along with the
//! blank lines directly under it. Paragraphs opening with `Abstract:` or
//! `Keywords:` count as meta sections as well.
//!
//! Text outside removed lines is left byte-identical, and the output ends in a
//! newline exactly when the input does.

use super::edits::{self, Edit};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralOptions {
    /// Lowercase section titles treated as meta sections (rule 2).
    pub meta_titles: Vec<String>,
    /// Lowercase section titles treated as reference lists (rule 3).
    pub reference_titles: Vec<String>,
}

impl Default for StructuralOptions {
    fn default() -> Self {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            meta_titles: own(&["abstract", "contents", "table of contents", "toc", "keywords", "summary of contents"]),
            reference_titles: own(&[
                "references",
                "bibliography",
                "works cited",
                "further reading",
                "sources",
                "notes",
                "external links",
                "literature",
            ]),
        }
    }
}

const META_LABELS: &[&str] = &["abstract:", "keywords:"];

/// Removes headings, meta sections and reference lists.
pub fn apply_structural_rules(text: &str, options: &StructuralOptions) -> String {
    let mut counts = Default::default();
    edits::apply(text, structural_edits(text, options), &mut counts)
}

struct Line<'a> {
    start: usize,
    end: usize,
    content: &'a str,
}

impl Line<'_> {
    fn is_blank(&self) -> bool {
        self.content.trim().is_empty()
    }

    fn heading(&self) -> Option<(usize, String)> {
        let t = self.content.trim_start();
        let level = t.chars().take_while(|&c| c == '#').count();
        if level == 0 || level > 6 {
            return None;
        }
        let rest = &t[level..];
        if !(rest.is_empty() || rest.starts_with(' ') || rest.starts_with('\t')) {
            return None;
        }
        let title = rest.trim().trim_end_matches('#').trim().trim_end_matches(':').to_lowercase();
        Some((level, title))
    }
}

fn lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut pos = 0;
    for chunk in text.split_inclusive('\n') {
        let content = chunk.trim_end_matches(['\n', '\r']);
        out.push(Line { start: pos, end: pos + chunk.len(), content });
        pos += chunk.len();
    }
    out
}

pub(crate) fn structural_edits(text: &str, options: &StructuralOptions) -> Vec<Edit> {
    let lines = lines(text);
    let mut rule_of: Vec<Option<u8>> = vec![None; lines.len()];

    let mut i = 0;
    while i < lines.len() {
        if let Some((level, title)) = lines[i].heading() {
            let section_rule = if options.meta_titles.contains(&title) {
                Some(2)
            } else if options.reference_titles.contains(&title) {
                Some(3)
            } else {
                None
            };
            match section_rule {
                Some(rule) => {
                    rule_of[i] = Some(rule);
                    let mut j = i + 1;
                    while j < lines.len() {
                        if let Some((l, _)) = lines[j].heading() {
                            if l <= level {
                                break;
                            }
                        }
                        rule_of[j] = Some(rule);
                        j += 1;
                    }
                    i = j;
                }
                None => {
                    rule_of[i] = Some(1);
                    let mut j = i + 1;
                    while j < lines.len() && lines[j].is_blank() {
                        rule_of[j] = Some(1);
                        j += 1;
                    }
                    i = j;
                }
            }
            continue;
        }
        let lower = lines[i].content.trim_start().to_lowercase();
        let starts_paragraph = i == 0 || lines[i - 1].is_blank() || rule_of[i - 1].is_some();
        if starts_paragraph && META_LABELS.iter().any(|l| lower.starts_with(l)) {
            let mut j = i;
            while j < lines.len() && !lines[j].is_blank() && lines[j].heading().is_none() {
                rule_of[j] = Some(2);
                j += 1;
            }
            while j < lines.len() && lines[j].is_blank() {
                rule_of[j] = Some(2);
                j += 1;
            }
            i = j;
            continue;
        }
        i += 1;
    }

    fix_document_end(text, &lines, &mut rule_of);

    let mut out: Vec<Edit> = Vec::new();
    for (line, rule) in lines.iter().zip(&rule_of) {
        let Some(rule) = *rule else { continue };
        match out.last_mut() {
            Some(prev) if prev.end == line.start && prev.rule == rule => prev.end = line.end,
            _ => out.push(Edit { start: line.start, end: line.end, replacement: String::new(), rule }),
        }
    }
    if let Some(trim) = end_trim(text, &lines, &rule_of) {
        // Drop the separator left dangling before a removed tail.
        match out.last_mut() {
            Some(last) if last.start == trim.end => last.start = trim.start,
            _ => out.push(trim),
        }
    }
    out
}

/// When the removed region reaches the end of the text, blank lines just
/// before it are removed too (attributed to the same rule).
fn fix_document_end(_text: &str, lines: &[Line<'_>], rule_of: &mut [Option<u8>]) {
    let Some(&Some(tail_rule)) = rule_of.last() else { return };
    let mut k = lines.len();
    while k > 0 && rule_of[k - 1].is_some() {
        k -= 1;
    }
    while k > 0 && lines[k - 1].is_blank() {
        rule_of[k - 1] = Some(tail_rule);
        k -= 1;
    }
}

/// If the input does not end in a newline but the last kept line does (because
/// everything after it was removed), that newline is removed as well.
fn end_trim(text: &str, lines: &[Line<'_>], rule_of: &[Option<u8>]) -> Option<Edit> {
    let &Some(tail_rule) = rule_of.last()? else { return None };
    if text.ends_with('\n') {
        return None;
    }
    let last_kept = rule_of.iter().rposition(|r| r.is_none())?;
    let line = &lines[last_kept];
    let newline_start = line.start + line.content.len();
    (newline_start < line.end).then(|| Edit {
        start: newline_start,
        end: line.end,
        replacement: String::new(),
        rule: tail_rule,
    })
}
