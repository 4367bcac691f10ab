//! Whole-word lexicon rewriting for rules 10–12.
//!
//! Words are maximal runs of alphabetic characters; a lexicon term matches
//! case-insensitively at a word start and must end at a word boundary. Terms
//! may span several words (`a priori`). When several terms match at the same
//! position the longest one wins.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::edits::{self, Edit};
use super::{PreprocessError, RuleCount};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub source_term: String,
    pub replacement: String,
    pub rule_id: u8,
}

/// A validated entry list, kept in longest-first match order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

impl Lexicon {
    pub fn new(mut entries: Vec<LexiconEntry>) -> Result<Self, PreprocessError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !(10..=12).contains(&e.rule_id) {
                return Err(PreprocessError::Lexicon(format!("rule {} is not a lexical rule", e.rule_id)));
            }
            if e.source_term.trim().is_empty() {
                return Err(PreprocessError::Lexicon("empty source term".into()));
            }
            if !e.source_term.chars().next().is_some_and(char::is_alphabetic)
                || !e.source_term.chars().last().is_some_and(char::is_alphabetic)
            {
                return Err(PreprocessError::Lexicon(format!(
                    "source term {:?} must start and end with a letter",
                    e.source_term
                )));
            }
            if !seen.insert((e.source_term.to_lowercase(), e.rule_id)) {
                return Err(PreprocessError::Lexicon(format!(
                    "duplicate entry {:?} for rule {}",
                    e.source_term, e.rule_id
                )));
            }
        }
        entries.sort_by(|a, b| {
            b.source_term
                .chars()
                .count()
                .cmp(&a.source_term.chars().count())
                .then_with(|| a.source_term.cmp(&b.source_term))
                .then_with(|| a.rule_id.cmp(&b.rule_id))
        });
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rejects lexicons whose output could be rewritten again by a second
    /// pass: no replacement or gloss may contain a source term.
    pub fn check_idempotent(&self) -> Result<(), PreprocessError> {
        let sources: Vec<String> = self.entries.iter().map(|e| e.source_term.clone()).collect();
        for e in &self.entries {
            if let Some((hit, _)) = find_terms(&e.replacement, &sources).into_iter().next() {
                return Err(PreprocessError::Lexicon(format!(
                    "replacement {:?} for {:?} contains lexicon term {:?}",
                    e.replacement, e.source_term, hit
                )));
            }
        }
        Ok(())
    }
}

fn is_word_start(text: &str, at: usize) -> bool {
    let starts_letter = text[at..].chars().next().is_some_and(char::is_alphabetic);
    let prev_letter = text[..at].chars().next_back().is_some_and(char::is_alphabetic);
    starts_letter && !prev_letter
}

/// Length in bytes of `term` matched case-insensitively at `text[at..]`, if it
/// matches and ends on a word boundary.
fn match_at(text: &str, at: usize, term: &str) -> Option<usize> {
    let mut t = text[at..].char_indices();
    let mut consumed = 0;
    for tc in term.chars() {
        let (off, c) = t.next()?;
        if !c.to_lowercase().eq(tc.to_lowercase()) {
            return None;
        }
        consumed = off + c.len_utf8();
    }
    let end = at + consumed;
    if text[end..].chars().next().is_some_and(char::is_alphabetic) {
        return None;
    }
    Some(consumed)
}

/// Copies the case of `matched`'s first character onto `replacement`.
fn match_case(matched: &str, replacement: &str) -> String {
    let Some(first) = matched.chars().next() else { return replacement.to_string() };
    let mut chars = replacement.chars();
    let Some(r0) = chars.next() else { return String::new() };
    let head: String = if first.is_uppercase() {
        r0.to_uppercase().collect()
    } else if first.is_lowercase() {
        r0.to_lowercase().collect()
    } else {
        r0.to_string()
    };
    head + chars.as_str()
}

fn gloss(translation: &str) -> String {
    format!(" ({translation})")
}

fn lexicon_edits(text: &str, lexicon: &Lexicon) -> Vec<Edit> {
    let mut out = Vec::new();
    if lexicon.is_empty() {
        return out;
    }
    let mut at = 0;
    while at < text.len() {
        if !is_word_start(text, at) {
            at += text[at..].chars().next().map_or(1, char::len_utf8);
            continue;
        }
        let hit = lexicon.entries.iter().find_map(|e| match_at(text, at, &e.source_term).map(|n| (e, n)));
        let Some((entry, n)) = hit else {
            at += text[at..].chars().next().map_or(1, char::len_utf8);
            continue;
        };
        let end = at + n;
        let matched = &text[at..end];
        match entry.rule_id {
            12 => {
                let g = gloss(&entry.replacement);
                if !text[end..].starts_with(&g) {
                    out.push(Edit { start: end, end, replacement: g, rule: 12 });
                }
            }
            rule => out.push(Edit {
                start: at,
                end,
                replacement: match_case(matched, &entry.replacement),
                rule,
            }),
        }
        at = end;
    }
    out
}

pub(crate) fn apply_counted(text: &str, lexicon: &Lexicon, counts: &mut BTreeMap<u8, RuleCount>) -> String {
    edits::apply(text, lexicon_edits(text, lexicon), counts)
}

/// Rule 10. Only rule-10 entries are used.
pub fn normalize_spelling(text: &str, entries: &[LexiconEntry]) -> Result<String, PreprocessError> {
    let lexicon = Lexicon::new(entries.iter().filter(|e| e.rule_id == 10).cloned().collect())?;
    let mut counts = BTreeMap::new();
    Ok(apply_counted(text, &lexicon, &mut counts))
}

/// Rules 11 (replace) and 12 (append a gloss). Only rule-11/12 entries are used.
pub fn replace_foreign_terms(text: &str, entries: &[LexiconEntry]) -> Result<String, PreprocessError> {
    let lexicon = Lexicon::new(entries.iter().filter(|e| e.rule_id == 11 || e.rule_id == 12).cloned().collect())?;
    let mut counts = BTreeMap::new();
    Ok(apply_counted(text, &lexicon, &mut counts))
}

/// Whole-word, case-insensitive occurrences of `terms` in `text`, reported as
/// `(term, byte offset)` in text order.
pub fn find_terms(text: &str, terms: &[String]) -> Vec<(String, usize)> {
    let mut sorted: Vec<&String> = terms.iter().filter(|t| !t.is_empty()).collect();
    sorted.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then_with(|| a.cmp(b)));
    let mut out = Vec::new();
    let mut at = 0;
    while at < text.len() {
        if is_word_start(text, at) {
            if let Some((t, n)) = sorted.iter().find_map(|t| match_at(text, at, t).map(|n| (*t, n))) {
                out.push((t.clone(), at));
                at += n;
                continue;
            }
        }
        at += text[at..].chars().next().map_or(1, char::len_utf8);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(src: &str, rep: &str, rule_id: u8) -> LexiconEntry {
        LexiconEntry { source_term: src.into(), replacement: rep.into(), rule_id }
    }

    fn spelling() -> Vec<LexiconEntry> {
        vec![e("colour", "color", 10), e("coloured", "colored", 10), e("honour", "honor", 10)]
    }

    #[test]
    fn british_to_us() {
        assert_eq!(normalize_spelling("The colour of honour", &spelling()).unwrap(), "The color of honor");
        assert_eq!(normalize_spelling("Colour matters", &spelling()).unwrap(), "Color matters");
    }

    #[test]
    fn already_us_is_unchanged() {
        let t = "The color of honor";
        assert_eq!(normalize_spelling(t, &spelling()).unwrap(), t);
    }

    #[test]
    fn longest_match_wins() {
        assert_eq!(normalize_spelling("coloured", &spelling()).unwrap(), "colored");
        let multi = vec![e("a priori", "prior", 11), e("priori", "X", 11)];
        assert_eq!(replace_foreign_terms("known a priori today", &multi).unwrap(), "known prior today");
    }

    #[test]
    fn whole_words_only() {
        assert_eq!(normalize_spelling("discolouration", &spelling()).unwrap(), "discolouration");
        assert_eq!(normalize_spelling("colour-blind", &spelling()).unwrap(), "color-blind");
    }

    #[test]
    fn foreign_replace_and_gloss() {
        let lex = vec![e("phronesis", "practical wisdom", 11), e("eudaimonia", "flourishing", 12)];
        assert_eq!(replace_foreign_terms("phronesis", &lex).unwrap(), "practical wisdom");
        assert_eq!(replace_foreign_terms("eudaimonia", &lex).unwrap(), "eudaimonia (flourishing)");
        assert_eq!(replace_foreign_terms("Phronesis leads to eudaimonia.", &lex).unwrap(), "Practical wisdom leads to eudaimonia (flourishing).");
        let once = replace_foreign_terms("eudaimonia", &lex).unwrap();
        assert_eq!(replace_foreign_terms(&once, &lex).unwrap(), once);
        assert_eq!(replace_foreign_terms("no foreign words", &lex).unwrap(), "no foreign words");
    }

    #[test]
    fn lexicon_validation() {
        assert!(Lexicon::new(vec![e("x", "y", 9)]).is_err());
        assert!(Lexicon::new(vec![e("colour", "color", 10), e("Colour", "color", 10)]).is_err());
        assert!(Lexicon::new(vec![e("colour", "color", 10), e("colour", "color", 11)]).is_ok());
        assert!(Lexicon::new(vec![e(" ", "y", 10)]).is_err());
        let cyc = Lexicon::new(vec![e("color", "colour", 10), e("colour", "color", 10)]).unwrap();
        assert!(cyc.check_idempotent().is_err());
    }

    #[test]
    fn find_terms_whole_word() {
        let hits = find_terms("Mill and Kant; kantian ethics. KANT.", &["Kant".into(), "Mill".into()]);
        assert_eq!(hits, vec![("Mill".into(), 0), ("Kant".into(), 9), ("Kant".into(), 31)]);
    }

    proptest! {
        #[test]
        fn spelling_is_idempotent(words in proptest::collection::vec(prop_oneof![
            Just("colour"), Just("Colour"), Just("honour"), Just("coloured"), Just("law"), Just("duty"), Just("-"), Just(", ")
        ], 0..20)) {
            let text = words.join(" ");
            let once = normalize_spelling(&text, &spelling()).unwrap();
            prop_assert_eq!(normalize_spelling(&once, &spelling()).unwrap(), once);
        }
    }
}
