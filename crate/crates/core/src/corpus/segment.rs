//! Rule-based sentence splitting and chunk grouping.
//!
//! A sentence ends at a run of `.`, `!` or `?` (optionally followed by
//! closing quotes or brackets) when the run is followed by whitespace and
//! the next visible character is uppercase, a digit, or an opening quote.
//! A period does not end a sentence when the word it terminates is a known
//! abbreviation or a single uppercase initial ("J. R. R. Tolkien").

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc", "e.g", "i.e", "inc",
    "ltd", "co", "corp", "no", "vol", "fig", "jan", "feb", "mar", "apr", "jun", "jul", "aug",
    "sep", "sept", "oct", "nov", "dec", "u.s", "u.k", "approx", "gen", "col", "lt", "sgt",
];

const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}', ')', ']'];
const OPENERS: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '('];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSplitter {
    abbreviations: BTreeSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSplitter {
    /// Abbreviations are matched case-insensitively, without the final period.
    pub fn with_abbreviations<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            abbreviations: abbreviations
                .into_iter()
                .map(|a| a.as_ref().trim_end_matches('.').to_lowercase())
                .collect(),
        }
    }

    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut out = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let (pos, ch) = chars[i];
            if !matches!(ch, '.' | '!' | '?') {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
                j += 1;
            }
            while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |c| c.0);
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let boundary = if j == chars.len() {
                true
            } else if k == j || k == chars.len() {
                // no whitespace after the run, or only trailing whitespace
                k == chars.len()
            } else {
                let next = chars[k].1;
                let starts_sentence =
                    next.is_uppercase() || next.is_ascii_digit() || OPENERS.contains(&next);
                starts_sentence && !(ch == '.' && j == i + 1 && self.is_abbreviation(&text[..pos]))
            };
            if boundary {
                let sentence = text[start..end].trim();
                if !sentence.is_empty() {
                    out.push(sentence);
                }
                start = end;
            }
            i = j.max(i + 1);
        }
        let tail = text[start..].trim();
        if !tail.is_empty() {
            out.push(tail);
        }
        out
    }

    /// `before` is the text preceding a period.
    fn is_abbreviation(&self, before: &str) -> bool {
        let word = before
            .rsplit(char::is_whitespace)
            .next()
            .unwrap_or("")
            .trim_start_matches(OPENERS);
        let mut chars = word.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if c.is_uppercase() {
                return true;
            }
        }
        !word.is_empty() && self.abbreviations.contains(&word.to_lowercase())
    }
}

/// How a document's sentences are grouped into chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "n")]
pub enum SegmentationPolicy {
    #[default]
    SentencePerChunk,
    /// Up to `n` consecutive sentences per chunk (`n >= 1`).
    FixedSentences(usize),
    /// The input is already chunked; the text is one chunk.
    PreChunked,
}

impl SegmentationPolicy {
    pub const JOINER: &'static str = " ";

    /// Group sentences into chunk texts.
    pub fn group(self, sentences: &[&str]) -> Vec<String> {
        match self {
            SegmentationPolicy::SentencePerChunk => {
                sentences.iter().map(|s| s.to_string()).collect()
            }
            SegmentationPolicy::FixedSentences(n) => sentences
                .chunks(n.max(1))
                .map(|group| group.join(Self::JOINER))
                .collect(),
            SegmentationPolicy::PreChunked => {
                if sentences.is_empty() {
                    Vec::new()
                } else {
                    vec![sentences.join(Self::JOINER)]
                }
            }
        }
    }
}

impl fmt::Display for SegmentationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentationPolicy::SentencePerChunk => f.write_str("sentence"),
            SegmentationPolicy::FixedSentences(n) => write!(f, "fixed:{n}"),
            SegmentationPolicy::PreChunked => f.write_str("prechunked"),
        }
    }
}

impl FromStr for SegmentationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sentence" => Ok(SegmentationPolicy::SentencePerChunk),
            "prechunked" => Ok(SegmentationPolicy::PreChunked),
            _ => match s.strip_prefix("fixed:").map(str::parse::<usize>) {
                Some(Ok(n)) if n >= 1 => Ok(SegmentationPolicy::FixedSentences(n)),
                _ => Err(Error::InvalidParam(format!(
                    "segmentation policy {s:?} (expected sentence, fixed:N, prechunked)"
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_on_terminal_punctuation() {
        let s = SentenceSplitter::default();
        assert_eq!(s.split("A b. C d. E f."), ["A b.", "C d.", "E f."]);
        assert_eq!(
            s.split("Is it? Yes! \"Quoted\" start. 1999 was a year."),
            ["Is it?", "Yes!", "\"Quoted\" start.", "1999 was a year."]
        );
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        let s = SentenceSplitter::default();
        assert_eq!(s.split("It cost 3.5 dollars. it was cheap."), ["It cost 3.5 dollars. it was cheap."]);
    }

    #[test]
    fn abbreviations_and_initials() {
        let s = SentenceSplitter::default();
        assert_eq!(
            s.split("Dr. Smith met J. R. R. Tolkien. They talked."),
            ["Dr. Smith met J. R. R. Tolkien.", "They talked."]
        );
        let custom = SentenceSplitter::with_abbreviations(["Smith."]);
        assert_eq!(custom.split("Met Smith. Then left."), ["Met Smith. Then left."]);
    }

    #[test]
    fn closing_quote_stays_with_sentence() {
        let s = SentenceSplitter::default();
        assert_eq!(s.split("He said \"go.\" Then he left."), ["He said \"go.\"", "Then he left."]);
    }

    #[test]
    fn empty_and_unterminated() {
        let s = SentenceSplitter::default();
        assert!(s.split("").is_empty());
        assert!(s.split("   ").is_empty());
        assert_eq!(s.split("no terminal punctuation"), ["no terminal punctuation"]);
    }

    #[test]
    fn grouping_policies() {
        let sents = ["S1.", "S2.", "S3.", "S4.", "S5."];
        assert_eq!(SegmentationPolicy::SentencePerChunk.group(&sents).len(), 5);
        let fixed = SegmentationPolicy::FixedSentences(2).group(&sents);
        assert_eq!(fixed, ["S1. S2.", "S3. S4.", "S5."]);
        assert_eq!(SegmentationPolicy::PreChunked.group(&sents), ["S1. S2. S3. S4. S5."]);
    }

    #[test]
    fn policy_parse_round_trip() {
        for p in [
            SegmentationPolicy::SentencePerChunk,
            SegmentationPolicy::FixedSentences(3),
            SegmentationPolicy::PreChunked,
        ] {
            assert_eq!(p.to_string().parse::<SegmentationPolicy>().unwrap(), p);
        }
        assert!("fixed:0".parse::<SegmentationPolicy>().is_err());
    }

    proptest! {
        // Segmentation is a partition of the non-whitespace content.
        #[test]
        fn split_partitions_text(text in "[A-Za-z0-9 .!?\"]{0,120}") {
            let s = SentenceSplitter::default();
            let joined: String = s.split(&text).concat();
            let strip = |t: &str| t.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            prop_assert_eq!(strip(&joined), strip(&text));
        }
    }
}
