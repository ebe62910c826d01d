//! Provider token accounting (TUIC, TCTC and the per-source breakdown).

use std::collections::BTreeMap;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

/// Where provider-bound tokens were spent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    ExtractionPromptIn,
    ExtractionOut,
    EmbeddingIn,
    DecompositionIn,
    DecompositionOut,
}

impl Source {
    /// Sources that count toward index construction.
    pub fn is_indexing(self) -> bool {
        matches!(
            self,
            Source::ExtractionPromptIn | Source::ExtractionOut | Source::EmbeddingIn
        )
    }
}

/// Tokens sent to and received from one provider call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input: u64,
    pub output: u64,
}

impl AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        self.input += rhs.input;
        self.output += rhs.output;
    }
}

/// Token ledger keyed by [`Source`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger(pub BTreeMap<Source, u64>);

impl TokenLedger {
    pub fn add(&mut self, source: Source, tokens: u64) {
        *self.0.entry(source).or_default() += tokens;
    }

    pub fn get(&self, source: Source) -> u64 {
        self.0.get(&source).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn merge(&mut self, other: &TokenLedger) {
        for (&s, &n) in &other.0 {
            self.add(s, n);
        }
    }
}

/// Indexing-time token totals.
///
/// `tuic` is every token sent to or received from extraction and embedding
/// providers while building the index (vectors are not tokens); `tctc` is
/// the raw corpus size under the same tokenizer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAccounting {
    pub tuic: u64,
    pub tctc: u64,
    pub breakdown: TokenLedger,
}

impl TokenAccounting {
    pub fn record(&mut self, source: Source, tokens: u64) {
        debug_assert!(source.is_indexing());
        self.breakdown.add(source, tokens);
        self.tuic += tokens;
    }

    pub fn absorb(&mut self, other: &TokenAccounting) {
        self.tuic += other.tuic;
        self.tctc += other.tctc;
        self.breakdown.merge(&other.breakdown);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuic_tracks_breakdown() {
        let mut acc = TokenAccounting::default();
        acc.record(Source::ExtractionPromptIn, 10);
        acc.record(Source::EmbeddingIn, 3);
        acc.record(Source::ExtractionPromptIn, 1);
        assert_eq!(acc.tuic, 14);
        assert_eq!(acc.breakdown.total(), acc.tuic);
        assert_eq!(acc.breakdown.get(Source::ExtractionPromptIn), 11);
    }

    #[test]
    fn labels_serialize_kebab() {
        let s = serde_json::to_string(&Source::ExtractionPromptIn).unwrap();
        assert_eq!(s, "\"extraction-prompt-in\"");
    }
}
