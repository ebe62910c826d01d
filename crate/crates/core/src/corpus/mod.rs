//! Corpus model: documents, ordered chunks, and the raw-corpus token total.

mod segment;

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

pub use segment::{SegmentationPolicy, SentenceSplitter};

use crate::error::{Error, Result};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub sentence_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub position: usize,
    pub text: String,
    pub token_count: u64,
}

impl Chunk {
    pub fn new(doc_id: &str, position: usize, text: &str, tokenizer: Tokenizer) -> Self {
        Chunk {
            chunk_id: chunk_id(doc_id, position),
            doc_id: doc_id.to_owned(),
            position,
            text: text.to_owned(),
            token_count: tokenizer.count(text),
        }
    }
}

pub fn chunk_id(doc_id: &str, position: usize) -> String {
    format!("{doc_id}#{position}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub chunks: Vec<Chunk>,
    pub total_corpus_tokens: u64,
    pub policy: SegmentationPolicy,
    pub tokenizer: Tokenizer,
}

impl Corpus {
    pub fn empty(policy: SegmentationPolicy, tokenizer: Tokenizer) -> Self {
        Corpus {
            documents: Vec::new(),
            chunks: Vec::new(),
            total_corpus_tokens: 0,
            policy,
            tokenizer,
        }
    }

    /// Segment raw `(doc_id, text)` documents.
    pub fn from_documents<I, S, T>(
        docs: I,
        policy: SegmentationPolicy,
        splitter: &SentenceSplitter,
        tokenizer: Tokenizer,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut corpus = Corpus::empty(policy, tokenizer);
        let mut seen = HashSet::new();
        for (doc_id, text) in docs {
            let doc_id = doc_id.into();
            if !seen.insert(doc_id.clone()) {
                return Err(Error::DuplicateDocId(doc_id));
            }
            let (doc, chunks) = segment_document(&doc_id, &text.into(), policy, splitter, tokenizer);
            corpus.push(doc, chunks);
        }
        Ok(corpus)
    }

    /// Build from documents that are already sentence- or passage-split.
    /// Position `i` of each document is its `i`-th item.
    pub fn from_prechunked<I, S>(docs: I, tokenizer: Tokenizer) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<String>)>,
        S: Into<String>,
    {
        let mut corpus = Corpus::empty(SegmentationPolicy::PreChunked, tokenizer);
        let mut seen = HashSet::new();
        for (doc_id, parts) in docs {
            let doc_id = doc_id.into();
            if !seen.insert(doc_id.clone()) {
                return Err(Error::DuplicateDocId(doc_id));
            }
            let chunks = parts
                .iter()
                .enumerate()
                .map(|(pos, text)| Chunk::new(&doc_id, pos, text.trim(), tokenizer))
                .collect();
            let doc = Document {
                text: parts.join(SegmentationPolicy::JOINER),
                sentence_count: parts.len(),
                doc_id,
            };
            corpus.push(doc, chunks);
        }
        Ok(corpus)
    }

    fn push(&mut self, doc: Document, chunks: Vec<Chunk>) {
        self.total_corpus_tokens += chunks.iter().map(|c| c.token_count).sum::<u64>();
        self.documents.push(doc);
        self.chunks.extend(chunks);
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

/// Split one document into ordered chunks under `policy`.
pub fn segment_document(
    doc_id: &str,
    text: &str,
    policy: SegmentationPolicy,
    splitter: &SentenceSplitter,
    tokenizer: Tokenizer,
) -> (Document, Vec<Chunk>) {
    let sentences = splitter.split(text);
    let chunks = policy
        .group(&sentences)
        .iter()
        .enumerate()
        .map(|(pos, t)| Chunk::new(doc_id, pos, t, tokenizer))
        .collect();
    let doc = Document {
        doc_id: doc_id.to_owned(),
        text: text.to_owned(),
        sentence_count: sentences.len(),
    };
    (doc, chunks)
}

#[derive(Deserialize)]
struct Record {
    doc_id: String,
    text: String,
    #[serde(default)]
    position: Option<usize>,
}

type PositionedLines = BTreeMap<usize, (usize, String)>;

/// Read a corpus from JSONL.
///
/// Lines are either `{"doc_id", "text"}` (segmented with `policy`) or
/// `{"doc_id", "position", "text"}` (pre-chunked, passed through). Blank
/// lines are skipped. A file must use one form throughout.
pub fn ingest_corpus<R: BufRead>(
    source: R,
    policy: SegmentationPolicy,
    splitter: &SentenceSplitter,
    tokenizer: Tokenizer,
) -> Result<Corpus> {
    let mut raw_docs: Vec<(String, String)> = Vec::new();
    // doc_id -> position -> (line, text), in first-seen order
    let mut pre: Vec<(String, PositionedLines)> = Vec::new();
    let mut pre_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut prechunked: Option<bool> = None;

    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: lineno,
            message: e.to_string(),
        })?;
        let is_pre = rec.position.is_some();
        match prechunked {
            None => prechunked = Some(is_pre),
            Some(p) if p != is_pre => return Err(Error::MixedRecordForms { line: lineno }),
            _ => {}
        }
        match rec.position {
            None => raw_docs.push((rec.doc_id, rec.text)),
            Some(pos) => {
                if rec.text.trim().is_empty() {
                    return Err(Error::MalformedRecord {
                        line: lineno,
                        message: "chunk text is empty".into(),
                    });
                }
                let slot = *pre_index.entry(rec.doc_id.clone()).or_insert_with(|| {
                    pre.push((rec.doc_id.clone(), BTreeMap::new()));
                    pre.len() - 1
                });
                if pre[slot].1.insert(pos, (lineno, rec.text)).is_some() {
                    return Err(Error::MalformedRecord {
                        line: lineno,
                        message: format!("duplicate position {pos} for doc_id {:?}", rec.doc_id),
                    });
                }
            }
        }
    }

    if prechunked == Some(true) {
        let mut docs = Vec::with_capacity(pre.len());
        for (doc_id, parts) in pre {
            if let Some((expected, _)) = parts.keys().enumerate().find(|(i, p)| i != *p) {
                return Err(Error::NonContiguousPositions {
                    doc_id,
                    position: expected,
                });
            }
            docs.push((doc_id, parts.into_values().map(|(_, t)| t).collect()));
        }
        Corpus::from_prechunked(docs, tokenizer)
    } else {
        Corpus::from_documents(raw_docs, policy, splitter, tokenizer)
    }
}
