//! Rule-based sentence segmentation tuned for legal and philosophical prose.
//!
//! A sentence ends at a run of `.`, `?` or `!` (plus any closing quotes or
//! brackets) that is followed by whitespace or the end of the text, or at a
//! blank line. A terminator does not end a sentence when
//!
//! - the next word starts with a lowercase letter (`e.g. the`, `approx. three`),
//! - the word before a `.` is a known abbreviation (`Art.`, `e.g.`, `Dr.`),
//! - the word before a `.` is a numbering abbreviation and a digit follows
//!   (`No. 3`, `p. 12`),
//! - the word before a `.` is a bare number opening the sentence (`1. This
//!   Regulation ...`).
//!
//! Single line breaks never split; a clause broken over several lines stays in
//! one sentence until it is terminated.

use super::Sentence;

/// Abbreviations that never end a sentence. Lowercase, without the final dot.
const ABBREVIATIONS: &[&str] = &[
    "al", "approx", "art", "arts", "cf", "ch", "co", "corp", "dept", "dr", "e.g", "ed", "eds",
    "eq", "eqs", "fig", "figs", "i.e", "ibid", "inc", "jr", "ltd", "mr", "mrs", "ms", "op", "para",
    "paras", "prof", "sec", "sr", "st", "subpara", "u.k", "u.s", "viz", "vol", "vols", "vs",
];

/// Abbreviations that only hold when a number follows (`No. 3`, `pp. 10-12`).
const NUMBERING_ABBREVIATIONS: &[&str] = &["n", "no", "nos", "p", "pp"];

const TERMINATORS: &[char] = &['.', '?', '!'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201D}', '\u{2019}', '\u{00BB}'];

/// True when `word` (the token before a `.`) is in the shipped abbreviation list.
pub fn is_abbreviation(word: &str) -> bool {
    let w = word.to_lowercase();
    ABBREVIATIONS.contains(&w.as_str())
}

/// Splits `text` into sentences. Spans are byte offsets into `text`, shifted by
/// `base` so callers can segment a slice of a larger document.
pub(crate) fn segment_at(text: &str, base: usize) -> Vec<Sentence> {
    let mut out = Vec::new();
    for (p_start, p_end) in paragraphs(text) {
        segment_paragraph(text, p_start, p_end, base, &mut out);
    }
    for (i, s) in out.iter_mut().enumerate() {
        s.index = i;
    }
    out
}

/// Byte ranges of blank-line separated paragraphs, trimmed of surrounding
/// whitespace. Whitespace-only paragraphs are dropped.
fn paragraphs(text: &str) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut start = 0;
    let mut line_start = 0;
    let mut prev_blank = false;
    let bytes = text.as_bytes();
    // Walk line by line; a whitespace-only line closes the current paragraph.
    while line_start <= text.len() {
        let line_end = match text[line_start..].find('\n') {
            Some(off) => line_start + off,
            None => text.len(),
        };
        let blank = text[line_start..line_end].trim().is_empty();
        if blank && !prev_blank {
            push_trimmed(text, start, line_start, &mut ranges);
        }
        if blank {
            start = line_end;
        }
        prev_blank = blank;
        if line_end >= text.len() {
            break;
        }
        line_start = line_end + 1;
        debug_assert!(bytes[line_end] == b'\n');
    }
    push_trimmed(text, start, text.len(), &mut ranges);
    ranges
}

fn push_trimmed(text: &str, start: usize, end: usize, out: &mut Vec<(usize, usize)>) {
    if start >= end {
        return;
    }
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if trimmed.is_empty() {
        return;
    }
    let s = start + lead;
    let range = (s, s + trimmed.len());
    if out.last() != Some(&range) {
        out.push(range);
    }
}

fn segment_paragraph(text: &str, start: usize, end: usize, base: usize, out: &mut Vec<Sentence>) {
    let para = &text[start..end];
    let chars: Vec<(usize, char)> = para.char_indices().collect();
    let mut sent_start: Option<usize> = None;
    let mut i = 0;
    while i < chars.len() {
        let (off, c) = chars[i];
        if sent_start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            sent_start = Some(off);
        }
        if !TERMINATORS.contains(&c) {
            i += 1;
            continue;
        }
        // Extend over the full terminator cluster, e.g. `?!` or `.")`.
        let mut j = i + 1;
        while j < chars.len() && (TERMINATORS.contains(&chars[j].1) || CLOSERS.contains(&chars[j].1)) {
            j += 1;
        }
        let at_end = j == chars.len();
        if !at_end && !chars[j].1.is_whitespace() {
            i = j;
            continue;
        }
        let s0 = sent_start.expect("sentence start set above");
        if !at_end && !is_boundary(para, &chars, s0, i, j) {
            i = j;
            continue;
        }
        let cluster_end = if at_end { para.len() } else { chars[j].0 };
        out.push(make_sentence(para, s0, cluster_end, start + base));
        sent_start = None;
        i = j;
    }
    if let Some(s0) = sent_start {
        let tail = para[s0..].trim_end();
        if !tail.is_empty() {
            out.push(make_sentence(para, s0, s0 + tail.len(), start + base));
        }
    }
}

fn make_sentence(para: &str, s: usize, e: usize, shift: usize) -> Sentence {
    Sentence {
        index: 0,
        text: para[s..e].to_string(),
        char_span: (s + shift, e + shift),
    }
}

/// Decides whether the terminator at `chars[term]` (cluster ending before
/// `chars[next]`, which is whitespace) really ends the sentence.
fn is_boundary(para: &str, chars: &[(usize, char)], sent_start: usize, term: usize, next: usize) -> bool {
    let following = chars[next..].iter().map(|&(_, c)| c).find(|c| !c.is_whitespace());
    if let Some(f) = following {
        if f.is_lowercase() {
            return false;
        }
    }
    if chars[term].1 != '.' {
        return true;
    }
    let word_end = chars[term].0;
    let word_start = para[..word_end]
        .char_indices()
        .rev()
        .find(|&(_, c)| c.is_whitespace())
        .map(|(o, c)| o + c.len_utf8())
        .unwrap_or(0);
    let raw = &para[word_start..word_end];
    let word = raw.trim_start_matches(|c: char| c == '(' || c == '[' || c == '"' || c == '\'' || c == '\u{201C}');
    if word.is_empty() {
        return true;
    }
    if is_abbreviation(word) {
        return false;
    }
    let lower = word.to_lowercase();
    if NUMBERING_ABBREVIATIONS.contains(&lower.as_str()) && following.is_some_and(|c| c.is_ascii_digit()) {
        return false;
    }
    // `1.` opening a sentence is list numbering, not a sentence of its own.
    if word_start <= sent_start && word.chars().all(|c| c.is_ascii_digit()) {
        return false;
    }
    true
}
