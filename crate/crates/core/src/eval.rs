//! HotpotQA-format evaluation: load examples, index their contexts,
//! retrieve for each question and score against the supporting facts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::accounting::{TokenAccounting, TokenLedger};
use crate::canonical::{canonical_digest, to_canonical_string};
use crate::corpus::{chunk_id, Chunk, Corpus, Document, SegmentationPolicy};
use crate::error::{Error, Result};
use crate::exec;
use crate::extraction::ExtractorConfig;
use crate::index::{build_index, EntityIndex, Pipeline};
use crate::metrics::{compute_ritu, score_retrieval, RetrievalScore};
use crate::retrieval::{retrieve, RetrievalParams};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalExample {
    pub question_id: String,
    pub question: String,
    /// `(title, sentence index)` pairs.
    pub gold_facts: BTreeSet<(String, usize)>,
    /// `(title, sentences)`; sentence `i` is chunk position `i`.
    pub context_docs: Vec<(String, Vec<String>)>,
}

impl EvalExample {
    pub fn gold_chunk_ids(&self) -> BTreeSet<String> {
        self.gold_facts.iter().map(|(t, i)| chunk_id(t, *i)).collect()
    }

    pub fn corpus(&self, tokenizer: Tokenizer) -> Result<Corpus> {
        corpus_of(self.context_docs.iter(), tokenizer)
    }
}

/// Pre-chunked corpus over `(title, sentences)`. Blank sentences are left
/// out but keep their index, so positions always match the source.
fn corpus_of<'a, I>(docs: I, tokenizer: Tokenizer) -> Result<Corpus>
where
    I: IntoIterator<Item = &'a (String, Vec<String>)>,
{
    let mut corpus = Corpus::empty(SegmentationPolicy::PreChunked, tokenizer);
    let mut seen = BTreeSet::new();
    for (title, sentences) in docs {
        if !seen.insert(title.as_str()) {
            return Err(Error::DuplicateDocId(title.clone()));
        }
        let chunks: Vec<Chunk> = sentences
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.trim().is_empty())
            .map(|(i, s)| Chunk::new(title, i, s.trim(), tokenizer))
            .collect();
        corpus.total_corpus_tokens += chunks.iter().map(|c| c.token_count).sum::<u64>();
        corpus.documents.push(Document {
            doc_id: title.clone(),
            text: chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join(SegmentationPolicy::JOINER),
            sentence_count: sentences.len(),
        });
        corpus.chunks.extend(chunks);
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedExample {
    pub question_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<EvalExample>,
    pub skipped: Vec<SkippedExample>,
}

#[derive(Deserialize)]
struct RawEntry {
    #[serde(rename = "_id", default)]
    id: Option<String>,
    question: String,
    supporting_facts: Vec<(String, usize)>,
    context: Vec<(String, Vec<String>)>,
}

fn check_example(raw: RawEntry, fallback_id: String) -> std::result::Result<EvalExample, SkippedExample> {
    let question_id = raw.id.unwrap_or(fallback_id);
    let skip = |reason: String| SkippedExample {
        question_id: question_id.clone(),
        reason,
    };
    if raw.question.trim().is_empty() {
        return Err(skip("question is empty".into()));
    }
    if raw.supporting_facts.is_empty() {
        return Err(skip("no supporting facts".into()));
    }
    let mut docs: BTreeMap<&str, &[String]> = BTreeMap::new();
    for (title, sentences) in &raw.context {
        if docs.insert(title, sentences).is_some() {
            return Err(skip(format!("duplicate context title {title:?}")));
        }
    }
    for (title, idx) in &raw.supporting_facts {
        match docs.get(title.as_str()) {
            None => return Err(skip(format!("supporting fact cites missing document {title:?}"))),
            Some(s) if *idx >= s.len() || s[*idx].trim().is_empty() => {
                return Err(skip(format!(
                    "supporting fact cites sentence {idx} of {title:?}, which has {} sentences",
                    s.len()
                )))
            }
            Some(_) => {}
        }
    }
    Ok(EvalExample {
        question_id,
        question: raw.question,
        gold_facts: raw.supporting_facts.into_iter().collect(),
        context_docs: raw.context,
    })
}

pub fn parse_hotpotqa(json: &str) -> Result<Dataset> {
    let entries: Vec<RawEntry> = serde_json::from_str(json)?;
    let mut out = Dataset::default();
    for (i, raw) in entries.into_iter().enumerate() {
        match check_example(raw, format!("q{i}")) {
            Ok(ex) => out.examples.push(ex),
            Err(s) => {
                log::warn!("skipping example {}: {}", s.question_id, s.reason);
                out.skipped.push(s);
            }
        }
    }
    Ok(out)
}

pub fn load_hotpotqa(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_hotpotqa(&text)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalScope {
    /// One index per example over its own context documents.
    #[default]
    PerExample,
    /// One index over every example's context documents.
    Pooled,
}

impl fmt::Display for EvalScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalScope::PerExample => "per-example",
            EvalScope::Pooled => "pooled",
        })
    }
}

impl FromStr for EvalScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-example" => Ok(EvalScope::PerExample),
            "pooled" => Ok(EvalScope::Pooled),
            other => Err(Error::InvalidParam(format!(
                "unknown scope {other:?} (expected per-example or pooled)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub scope: EvalScope,
    pub averaging: String,
    pub params: RetrievalParams,
    pub extractor: ExtractorConfig,
    pub embedder_id: String,
    pub tokenizer: Tokenizer,
    pub segmentation: SegmentationPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub question_id: String,
    #[serde(flatten)]
    pub score: RetrievalScore,
    pub retrieved: Vec<String>,
    pub trace_digest: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub examples: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Pooled scope: same-titled documents with different sentences; the
    /// first occurrence is kept.
    pub conflicting_documents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub recall: f64,
    pub f1: f64,
    pub ritu: f64,
    pub tuic: u64,
    pub tctc: u64,
    pub breakdown: TokenLedger,
    pub index_time_seconds: f64,
    pub per_example: Vec<ExampleResult>,
    pub config: EvalConfig,
    pub counts: EvalCounts,
}

impl EvalReport {
    /// Clear wall-clock fields so reports can be compared byte for byte.
    pub fn zero_timing(&mut self) {
        self.index_time_seconds = 0.0;
    }

    /// Canonical JSON followed by a newline.
    pub fn to_json(&self) -> Result<String> {
        Ok(to_canonical_string(self)? + "\n")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record([
            "question_id",
            "status",
            "accuracy",
            "recall",
            "f1",
            "retrieved_count",
            "gold_count",
            "trace_digest",
        ])
        .map_err(|e| csv_error(path, e))?;
        for r in &self.per_example {
            w.write_record([
                r.question_id.clone(),
                if r.error.is_some() { "failed" } else { "ok" }.to_owned(),
                r.score.accuracy.to_string(),
                r.score.recall.to_string(),
                r.score.f1.to_string(),
                r.score.retrieved_count.to_string(),
                r.score.gold_count.to_string(),
                r.trace_digest.clone().unwrap_or_default(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Provider(format!("csv: {other:?}")),
    }
}

/// Retrieve for one question and score it.
fn answer(ex: &EvalExample, index: &EntityIndex, params: &RetrievalParams, pipeline: &Pipeline) -> ExampleResult {
    let gold = ex.gold_chunk_ids();
    let outcome = retrieve(index, &ex.question, params, pipeline).and_then(|ctx| {
        let retrieved: BTreeSet<String> = ctx.chunk_ids().map(str::to_owned).collect();
        let score = score_retrieval(&retrieved, &gold)?;
        Ok((score, retrieved, canonical_digest(&ctx.trace)?))
    });
    match outcome {
        Ok((score, retrieved, digest)) => ExampleResult {
            question_id: ex.question_id.clone(),
            score,
            retrieved: retrieved.into_iter().collect(),
            trace_digest: Some(digest),
            error: None,
        },
        Err(e) => failed(ex, &e),
    }
}

fn failed(ex: &EvalExample, e: &Error) -> ExampleResult {
    log::warn!("example {} failed: {e}", ex.question_id);
    ExampleResult {
        question_id: ex.question_id.clone(),
        score: RetrievalScore {
            gold_count: ex.gold_facts.len(),
            ..RetrievalScore::ZERO
        },
        retrieved: Vec::new(),
        trace_digest: None,
        error: Some(e.to_string()),
    }
}

fn timed_build(corpus: &Corpus, pipeline: &Pipeline) -> (Result<EntityIndex>, f64) {
    let start = Instant::now();
    let index = build_index(corpus, pipeline);
    (index, start.elapsed().as_secs_f64())
}

/// Documents of all examples with identical duplicates merged.
fn pooled_docs(examples: &[EvalExample]) -> (Vec<(String, Vec<String>)>, usize) {
    let mut by_title: BTreeMap<&str, &Vec<String>> = BTreeMap::new();
    let mut docs = Vec::new();
    let mut conflicts = 0;
    for (title, sentences) in examples.iter().flat_map(|e| &e.context_docs) {
        match by_title.get(title.as_str()) {
            Some(prev) if *prev == sentences => {}
            Some(_) => {
                log::warn!("document {title:?} appears with different sentences; keeping the first");
                conflicts += 1;
            }
            None => {
                by_title.insert(title, sentences);
                docs.push((title.clone(), sentences.clone()));
            }
        }
    }
    (docs, conflicts)
}

pub fn run_eval(
    examples: &[EvalExample],
    pipeline: &Pipeline,
    params: &RetrievalParams,
    scope: EvalScope,
) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::NoExamples);
    }
    params.validate()?;
    let pipeline = Pipeline {
        policy: SegmentationPolicy::PreChunked,
        ..*pipeline
    };
    let mut accounting = TokenAccounting::default();
    let mut index_time = 0.0;
    let mut counts = EvalCounts {
        examples: examples.len(),
        ..EvalCounts::default()
    };

    let per_example: Vec<ExampleResult> = match scope {
        EvalScope::PerExample => {
            let runs = exec::map(pipeline.execution, examples, |ex| {
                let corpus = match ex.corpus(pipeline.tokenizer) {
                    Ok(c) => c,
                    Err(e) => return (failed(ex, &e), None, 0.0),
                };
                let (index, secs) = timed_build(&corpus, &pipeline);
                match index {
                    Ok(index) => {
                        let result = answer(ex, &index, params, &pipeline);
                        (result, Some(index.accounting), secs)
                    }
                    Err(e) => (failed(ex, &e), None, secs),
                }
            });
            runs.into_iter()
                .map(|(result, acc, secs)| {
                    if let Some(acc) = acc {
                        accounting.absorb(&acc);
                    }
                    index_time += secs;
                    result
                })
                .collect()
        }
        EvalScope::Pooled => {
            let (docs, conflicts) = pooled_docs(examples);
            counts.conflicting_documents = conflicts;
            let corpus = corpus_of(&docs, pipeline.tokenizer)?;
            let (index, secs) = timed_build(&corpus, &pipeline);
            index_time = secs;
            match index {
                Ok(index) => {
                    accounting = index.accounting.clone();
                    exec::map(pipeline.execution, examples, |ex| answer(ex, &index, params, &pipeline))
                }
                Err(e) => examples.iter().map(|ex| failed(ex, &e)).collect(),
            }
        }
    };

    counts.failed = per_example.iter().filter(|r| r.error.is_some()).count();
    let n = per_example.len() as f64;
    let mean = |f: fn(&RetrievalScore) -> f64| per_example.iter().map(|r| f(&r.score)).sum::<f64>() / n;
    let ritu = compute_ritu(&accounting);
    Ok(EvalReport {
        accuracy: mean(|s| s.accuracy),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
        ritu: ritu.ritu,
        tuic: ritu.tuic,
        tctc: ritu.tctc,
        breakdown: ritu.breakdown,
        index_time_seconds: index_time,
        config: EvalConfig {
            scope,
            averaging: "macro".into(),
            params: params.clone(),
            extractor: pipeline.extractor.config().clone(),
            embedder_id: pipeline.embedder.id().to_owned(),
            tokenizer: pipeline.tokenizer,
            segmentation: pipeline.policy,
        },
        per_example,
        counts,
    })
}
