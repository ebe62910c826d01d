//! Accounting tokenizer.
//!
//! Every token count in the crate (corpus totals, provider usage, context
//! budgets) goes through a [`Tokenizer`] so that RITU is reproducible
//! offline and across languages.
//!
//! `ws-punct-v1` rules:
//!
//! 1. Split the text on Unicode whitespace.
//! 2. Inside each piece, every maximal run of alphanumeric characters
//!    (`char::is_alphanumeric`) is one token.
//! 3. Every other character is a token of its own.
//!
//! So `"don't stop, now."` is `don ' t stop , now .` = 7 tokens.
//!
//! `ws-v1` is the bare whitespace split (rule 1 only).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum Tokenizer {
    #[default]
    #[serde(rename = "ws-punct-v1")]
    WhitespacePunct,
    #[serde(rename = "ws-v1")]
    Whitespace,
}

impl Tokenizer {
    pub const ALL: [Tokenizer; 2] = [Tokenizer::WhitespacePunct, Tokenizer::Whitespace];

    pub fn id(self) -> &'static str {
        match self {
            Tokenizer::WhitespacePunct => "ws-punct-v1",
            Tokenizer::Whitespace => "ws-v1",
        }
    }

    pub fn count(self, text: &str) -> u64 {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().count() as u64,
            Tokenizer::WhitespacePunct => text.split_whitespace().map(count_piece).sum(),
        }
    }

    /// Token strings, for debugging and tests.
    pub fn tokens(self, text: &str) -> Vec<String> {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().map(str::to_owned).collect(),
            Tokenizer::WhitespacePunct => {
                let mut out = Vec::new();
                for piece in text.split_whitespace() {
                    let mut run = String::new();
                    for ch in piece.chars() {
                        if ch.is_alphanumeric() {
                            run.push(ch);
                        } else {
                            if !run.is_empty() {
                                out.push(std::mem::take(&mut run));
                            }
                            out.push(ch.to_string());
                        }
                    }
                    if !run.is_empty() {
                        out.push(run);
                    }
                }
                out
            }
        }
    }
}

fn count_piece(piece: &str) -> u64 {
    let mut n = 0;
    let mut in_run = false;
    for ch in piece.chars() {
        if ch.is_alphanumeric() {
            if !in_run {
                n += 1;
                in_run = true;
            }
        } else {
            n += 1;
            in_run = false;
        }
    }
    n
}

impl FromStr for Tokenizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tokenizer::ALL
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| Error::UnknownTokenizer(s.to_owned()))
    }
}

impl fmt::Display for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Count tokens with a tokenizer looked up by id.
pub fn count_tokens(text: &str, tokenizer_id: &str) -> Result<u64> {
    Ok(tokenizer_id.parse::<Tokenizer>()?.count(text))
}
