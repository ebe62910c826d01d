//! Retrieval quality scores and relative index token utilization.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::accounting::{TokenAccounting, TokenLedger};
use crate::error::{Error, Result};
pub use crate::tokenizer::count_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalScore {
    /// Fraction of retrieved units that are gold (precision).
    pub accuracy: f64,
    pub recall: f64,
    pub f1: f64,
    pub retrieved_count: usize,
    pub gold_count: usize,
}

impl RetrievalScore {
    pub const ZERO: RetrievalScore = RetrievalScore {
        accuracy: 0.0,
        recall: 0.0,
        f1: 0.0,
        retrieved_count: 0,
        gold_count: 0,
    };
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn score_retrieval<T: Ord>(retrieved: &BTreeSet<T>, gold: &BTreeSet<T>) -> Result<RetrievalScore> {
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    let hits = retrieved.intersection(gold).count() as f64;
    let accuracy = if retrieved.is_empty() {
        0.0
    } else {
        hits / retrieved.len() as f64
    };
    let recall = hits / gold.len() as f64;
    Ok(RetrievalScore {
        accuracy,
        recall,
        f1: f1_score(accuracy, recall),
        retrieved_count: retrieved.len(),
        gold_count: gold.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RituReport {
    pub tuic: u64,
    pub tctc: u64,
    pub ritu: f64,
    pub breakdown: TokenLedger,
    pub empty_corpus: bool,
}

pub fn compute_ritu(accounting: &TokenAccounting) -> RituReport {
    let empty_corpus = accounting.tctc == 0;
    RituReport {
        tuic: accounting.tuic,
        tctc: accounting.tctc,
        ritu: if empty_corpus {
            0.0
        } else {
            accounting.tuic as f64 / accounting.tctc as f64
        },
        breakdown: accounting.breakdown.clone(),
        empty_corpus,
    }
}
