//! Rule-based sentence segmentation.
//!
//! A sentence ends at `.`, `!` or `?` when the terminator is followed by
//! whitespace and an uppercase letter or digit, unless the period closes a
//! known abbreviation. Deterministic and dependency-free; adequate for
//! scientific prose.

use std::ops::Range;

/// Periods ending these tokens never close a sentence. Matched
/// case-insensitively against the text ending at the candidate period.
const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "et al.", "dr.", "fig.", "eq.", "cf.", "vs.", "approx.",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn ends_with_abbreviation(text: &str, end: usize) -> bool {
    let head = &text[..end];
    let lower = head.to_lowercase();
    ABBREVIATIONS.iter().any(|abbr| {
        if !lower.ends_with(abbr) {
            return false;
        }
        // Reject mid-word hits like "grseq." for "eq.". The abbreviations are
        // ASCII, so the byte offset is a char boundary unless case-folding
        // shifted lengths; bail out of the check in that case.
        let cut = head.len().saturating_sub(abbr.len());
        if !head.is_char_boundary(cut) {
            return false;
        }
        match head[..cut].chars().next_back() {
            None => true,
            Some(prev) => !prev.is_alphanumeric(),
        }
    })
}

/// Split `text` into sentence spans (byte ranges).
///
/// The returned spans are ordered, non-overlapping, and jointly cover every
/// non-whitespace character. Empty or whitespace-only input yields no spans.
pub fn segment_sentences(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut last_non_ws_end = 0usize;

    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        if start.is_none() {
            start = Some(i);
        }
        last_non_ws_end = i + c.len_utf8();

        if !is_terminator(c) {
            continue;
        }

        // Absorb a run of terminators ("?!", "...") into the same candidate.
        let mut end = i + c.len_utf8();
        let mut run_is_single_period = c == '.';
        while let Some(&(j, next)) = chars.peek() {
            if is_terminator(next) {
                run_is_single_period = false;
                end = j + next.len_utf8();
                last_non_ws_end = end;
                chars.next();
            } else {
                break;
            }
        }

        if run_is_single_period && ends_with_abbreviation(text, end) {
            continue;
        }

        // Boundary if followed by whitespace then an uppercase letter or
        // digit, or if the text ends here.
        let rest = &text[end..];
        let trimmed = rest.trim_start();
        let had_ws = trimmed.len() < rest.len();
        let boundary = match trimmed.chars().next() {
            None => true,
            Some(next) => had_ws && (next.is_uppercase() || next.is_numeric()),
        };
        if boundary {
            spans.push(start.take().expect("span start set")..end);
        }
    }

    if let Some(s) = start {
        if last_non_ws_end > s {
            spans.push(s..last_non_ws_end);
        }
    }
    spans
}
