//! The text space: token sequences stored as strings.
//!
//! Prompts, responses, task descriptions and every other piece of dialogue
//! are values of [`Text`]. Token boundaries are whitespace-delimited; the
//! only constructor beyond literals is concatenation.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A value in the text space: an ordered token sequence stored canonically
/// as a character string. Tokens are maximal runs of non-whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Text(String);

impl Text {
    pub fn new(content: impl Into<String>) -> Self {
        Text(content.into())
    }

    pub fn empty() -> Self {
        Text(String::new())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of whitespace-delimited tokens.
    pub fn token_count(&self) -> usize {
        self.0.split_whitespace().count()
    }

    /// True if `needle` occurs as a contiguous substring.
    pub fn contains(&self, needle: &str) -> bool {
        self.0.contains(needle)
    }
}

impl fmt::Display for Text {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Text {
    fn from(s: &str) -> Self {
        Text(s.to_string())
    }
}

impl From<String> for Text {
    fn from(s: String) -> Self {
        Text(s)
    }
}

/// Join parts in order with a single space between non-empty parts.
/// Empty parts are skipped, so the empty text is a two-sided identity.
pub fn concat<I>(parts: I) -> Text
where
    I: IntoIterator,
    I::Item: AsRef<Text>,
{
    let mut out = String::new();
    for part in parts {
        let part = part.as_ref();
        if part.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(part.as_str());
    }
    Text(out)
}

impl AsRef<Text> for Text {
    fn as_ref(&self) -> &Text {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_of_nothing_is_empty() {
        assert_eq!(concat(Vec::<Text>::new()), Text::empty());
    }

    #[test]
    fn empty_is_identity() {
        let q = Text::new("What is 7*9?");
        assert_eq!(concat([Text::empty(), q.clone()]), q);
        assert_eq!(concat([q.clone(), Text::empty()]), q);
    }

    #[test]
    fn concat_inserts_single_spaces() {
        let parts = [
            Text::new("<Question>"),
            Text::new("Hint: the answer is close to"),
            Text::new("730391"),
        ];
        assert_eq!(
            concat(parts).as_str(),
            "<Question> Hint: the answer is close to 730391"
        );
    }

    #[test]
    fn token_count_adds_up() {
        let a = Text::new("one two");
        let b = Text::new("three");
        assert_eq!(
            concat([a.clone(), b.clone()]).token_count(),
            a.token_count() + b.token_count()
        );
    }
}
