//! Answer extraction and canonicalization.
//!
//! Responses are free text; scoring needs a canonical value to compare
//! against ground truth. Extraction is rule-based: the last sign-prefixed
//! digit run for numeric tasks, the final non-empty line for string tasks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::text::Text;

/// How answers are read out of a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Numeric,
    String,
}

/// An answer in canonical form.
///
/// Numeric kind: optional `-` sign followed by digits, no separators, no
/// leading zeros, no trailing punctuation. String kind: trimmed, lowercased.
/// Canonicalizing a canonical value is a no-op.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalAnswer(String);

impl CanonicalAnswer {
    /// Canonicalize `raw` under `kind`. Returns `None` when nothing remains
    /// after stripping (e.g. a numeric value with no digits).
    pub fn canonicalize(raw: &str, kind: AnswerKind) -> Option<CanonicalAnswer> {
        match kind {
            AnswerKind::Numeric => canonicalize_numeric(raw),
            AnswerKind::String => {
                let s = raw.trim().to_lowercase();
                if s.is_empty() {
                    None
                } else {
                    Some(CanonicalAnswer(s))
                }
            }
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Total order used for deterministic tie-breaking: numeric answers
    /// compare by value, everything else lexicographically.
    pub fn canonical_cmp(&self, other: &CanonicalAnswer) -> std::cmp::Ordering {
        match (numeric_parts(&self.0), numeric_parts(&other.0)) {
            (Some(a), Some(b)) => cmp_integers(a, b),
            _ => self.0.cmp(&other.0),
        }
    }
}

impl fmt::Display for CanonicalAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Split a canonical numeric string into (negative, magnitude digits).
fn numeric_parts(s: &str) -> Option<(bool, &str)> {
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((neg, digits))
}

/// Value order on zero-trimmed magnitudes: shorter digit strings are smaller,
/// equal lengths compare lexicographically; negatives reverse it.
fn cmp_integers(a: (bool, &str), b: (bool, &str)) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a.0, b.0) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (neg, _) => {
            let magnitude = a.1.len().cmp(&b.1.len()).then_with(|| a.1.cmp(b.1));
            if neg {
                magnitude.reverse()
            } else {
                magnitude
            }
        }
    }
}

fn canonicalize_numeric(raw: &str) -> Option<CanonicalAnswer> {
    let mut s = raw.trim();
    // Trailing punctuation: Fig-1 style renderings end the answer with "."
    while let Some(stripped) = s.strip_suffix(['.', ',']) {
        s = stripped;
    }
    let (neg, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let digits: String = body.chars().filter(|c| *c != ',').collect();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let trimmed = digits.trim_start_matches('0');
    let magnitude = if trimmed.is_empty() { "0" } else { trimmed };
    let value = if neg && magnitude != "0" {
        format!("-{magnitude}")
    } else {
        magnitude.to_string()
    };
    Some(CanonicalAnswer(value))
}

/// Pull a canonical answer out of a raw response, if one exists.
/// Absence is a value, not an error.
///
/// Numeric kind: the last maximal digit run (commas allowed as thousands
/// separators), taking an immediately preceding sign when it is not part of
/// a digit range like `3-5`. String kind: the final non-empty line.
pub fn extract_answer(response: &Text, kind: AnswerKind) -> Option<CanonicalAnswer> {
    match kind {
        AnswerKind::Numeric => extract_numeric(response.as_str()),
        AnswerKind::String => response
            .as_str()
            .lines()
            .rev()
            .find(|line| !line.trim().is_empty())
            .and_then(|line| CanonicalAnswer::canonicalize(line, AnswerKind::String)),
    }
}

fn extract_numeric(text: &str) -> Option<CanonicalAnswer> {
    let bytes = text.as_bytes();
    let mut last_run: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            let mut end = i + 1;
            while end < bytes.len() {
                if bytes[end].is_ascii_digit() {
                    end += 1;
                } else if bytes[end] == b','
                    && end + 1 < bytes.len()
                    && bytes[end + 1].is_ascii_digit()
                {
                    // thousands separator inside the run
                    end += 2;
                } else {
                    break;
                }
            }
            last_run = Some((start, end));
            i = end;
        } else {
            i += 1;
        }
    }
    let (start, end) = last_run?;
    let mut candidate = text[start..end].to_string();
    if start > 0 && (bytes[start - 1] == b'-' || bytes[start - 1] == b'+') {
        // A sign between two digits is a range/expression, not a sign.
        let attached = start < 2 || !bytes[start - 2].is_ascii_digit();
        if attached {
            candidate.insert(0, bytes[start - 1] as char);
        }
    }
    canonicalize_numeric(&candidate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(s: &str) -> Option<CanonicalAnswer> {
        extract_answer(&Text::new(s), AnswerKind::Numeric)
    }

    #[test]
    fn takes_last_digit_run() {
        assert_eq!(num("The answer is 730391.").unwrap().as_str(), "730391");
        assert_eq!(num("first 12 then 15").unwrap().as_str(), "15");
    }

    #[test]
    fn no_digits_is_none() {
        assert_eq!(num("no digits here"), None);
    }

    #[test]
    fn strips_separators_and_punctuation() {
        assert_eq!(num("about 1,234,567.").unwrap().as_str(), "1234567");
        assert_eq!(num("exactly 42,").unwrap().as_str(), "42");
    }

    #[test]
    fn signs_attach_only_outside_ranges() {
        assert_eq!(num("delta is -5.").unwrap().as_str(), "-5");
        assert_eq!(num("pick within 3-5").unwrap().as_str(), "5");
        assert_eq!(num("value +7").unwrap().as_str(), "7");
    }

    #[test]
    fn leading_zeros_normalize() {
        assert_eq!(num("code 0042").unwrap().as_str(), "42");
        assert_eq!(
            CanonicalAnswer::canonicalize("-0", AnswerKind::Numeric)
                .unwrap()
                .as_str(),
            "0"
        );
    }

    #[test]
    fn string_kind_takes_final_nonempty_line() {
        let resp = Text::new("Reasoning...\n\nParis \n\n");
        assert_eq!(
            extract_answer(&resp, AnswerKind::String).unwrap().as_str(),
            "paris"
        );
        assert_eq!(extract_answer(&Text::new("  \n \n"), AnswerKind::String), None);
    }

    #[test]
    fn canonicalize_is_idempotent() {
        for (raw, kind) in [
            ("00730391.", AnswerKind::Numeric),
            ("-0,012.", AnswerKind::Numeric),
            ("  MiXeD Case  ", AnswerKind::String),
        ] {
            let once = CanonicalAnswer::canonicalize(raw, kind).unwrap();
            let twice = CanonicalAnswer::canonicalize(once.as_str(), kind).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn ordering_is_by_numeric_value() {
        let a = CanonicalAnswer::canonicalize("4", AnswerKind::Numeric).unwrap();
        let b = CanonicalAnswer::canonicalize("15", AnswerKind::Numeric).unwrap();
        let c = CanonicalAnswer::canonicalize("-3", AnswerKind::Numeric).unwrap();
        assert_eq!(a.canonical_cmp(&b), std::cmp::Ordering::Less);
        assert_eq!(c.canonical_cmp(&a), std::cmp::Ordering::Less);
    }
}
