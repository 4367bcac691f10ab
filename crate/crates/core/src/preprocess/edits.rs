//! Byte-range edit sets over a single text.

use std::collections::BTreeMap;

use super::{PreprocessError, RuleCount};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: String,
    pub rule: u8,
}

/// Applies disjoint edits right-to-left and accumulates per-rule counts in
/// Unicode scalars.
pub(crate) fn apply(text: &str, mut edits: Vec<Edit>, counts: &mut BTreeMap<u8, RuleCount>) -> String {
    edits.sort_by_key(|e| (e.start, e.end));
    debug_assert!(edits.windows(2).all(|w| w[0].end <= w[1].start));
    let mut out = text.to_string();
    for e in edits.iter().rev() {
        let removed = text[e.start..e.end].chars().count() as i64 - e.replacement.chars().count() as i64;
        let c = counts.entry(e.rule).or_default();
        c.edits += 1;
        c.removed_chars += removed;
        out.replace_range(e.start..e.end, &e.replacement);
    }
    out
}

/// Separates annotation edits that lie wholly inside a structural removal
/// (they are redundant) from the rest. A partial overlap is an error.
pub(crate) fn drop_superseded(
    doc: &str,
    structural: &[Edit],
    annotation: Vec<Edit>,
) -> Result<(Vec<Edit>, usize), PreprocessError> {
    let mut kept = Vec::with_capacity(annotation.len());
    let mut superseded = 0;
    'outer: for a in annotation {
        for s in structural {
            let inside = a.start >= s.start && a.end <= s.end;
            let touches = a.start < s.end && s.start < a.end;
            if inside {
                superseded += 1;
                continue 'outer;
            }
            if touches {
                return Err(PreprocessError::OverlappingSpans {
                    doc: doc.to_string(),
                    first: (s.start, s.end),
                    second: (a.start, a.end),
                });
            }
        }
        kept.push(a);
    }
    Ok((kept, superseded))
}
