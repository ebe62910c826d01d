//! The entity index: entity set, entity-to-chunk inverted map, entity
//! vectors, chunk catalog and indexing token accounting.

mod persist;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use persist::{from_bytes, load_index, save_index, to_bytes};

use crate::accounting::{Source, TokenAccounting};
use crate::canonical::canonical_digest;
use crate::corpus::{Chunk, Corpus, SegmentationPolicy};
use crate::embedding::{Embedder, EntityVectorStore};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::extraction::{normalize_entity, CanonicalEntity, EntityExtractor};
use crate::tokenizer::Tokenizer;

pub const SCHEMA: &str = "slimrag-index/v1";

/// Entities embedded per provider call during indexing.
const EMBED_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub doc_id: String,
    pub position: usize,
    pub text: String,
    pub token_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityIndex {
    pub schema: String,
    pub config_fingerprint: String,
    pub entities: BTreeSet<CanonicalEntity>,
    pub inverted_map: BTreeMap<CanonicalEntity, BTreeSet<String>>,
    pub vectors: EntityVectorStore,
    pub chunk_catalog: BTreeMap<String, CatalogEntry>,
    pub accounting: TokenAccounting,
}

/// Everything that shapes index contents, plus how to run the work.
#[derive(Clone, Copy)]
pub struct Pipeline<'a> {
    pub extractor: &'a dyn EntityExtractor,
    pub embedder: &'a dyn Embedder,
    pub policy: SegmentationPolicy,
    pub tokenizer: Tokenizer,
    pub execution: Execution,
}

impl<'a> Pipeline<'a> {
    pub fn new(extractor: &'a dyn EntityExtractor, embedder: &'a dyn Embedder) -> Self {
        Pipeline {
            extractor,
            embedder,
            policy: SegmentationPolicy::default(),
            tokenizer: Tokenizer::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_policy(mut self, policy: SegmentationPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_tokenizer(mut self, tokenizer: Tokenizer) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn fingerprint(&self) -> String {
        let record = serde_json::json!({
            "schema": SCHEMA,
            "segmentation": self.policy,
            "extractor": self.extractor.config().index_identity(),
            "embedder_id": self.embedder.id(),
            "tokenizer": self.tokenizer,
        });
        canonical_digest(&record).expect("fingerprint record is plain JSON")
    }

    pub(crate) fn check(&self, index: &EntityIndex) -> Result<()> {
        let actual = self.fingerprint();
        if actual != index.config_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: index.config_fingerprint.clone(),
                actual,
            });
        }
        Ok(())
    }
}

/// Per-chunk extraction result before merging.
struct ChunkEntities {
    chunk_id: String,
    entities: BTreeSet<CanonicalEntity>,
    prompt_in: u64,
    out: u64,
}

impl EntityIndex {
    pub fn empty(pipeline: &Pipeline) -> Self {
        EntityIndex {
            schema: SCHEMA.to_owned(),
            config_fingerprint: pipeline.fingerprint(),
            entities: BTreeSet::new(),
            inverted_map: BTreeMap::new(),
            vectors: EntityVectorStore::new(
                pipeline.embedder.id(),
                pipeline.embedder.dimension().unwrap_or(0),
            ),
            chunk_catalog: BTreeMap::new(),
            accounting: TokenAccounting::default(),
        }
    }

    pub fn chunk_count(&self) -> usize {
        self.chunk_catalog.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunk_catalog.is_empty()
    }

    /// Chunk ids recorded for `entity`; empty when it is not indexed.
    pub fn lookup(&self, entity: &CanonicalEntity) -> &BTreeSet<String> {
        static EMPTY: BTreeSet<String> = BTreeSet::new();
        self.inverted_map.get(entity).unwrap_or(&EMPTY)
    }

    /// [`lookup`](Self::lookup) after normalizing raw text.
    pub fn lookup_raw(&self, entity: &str) -> Result<&BTreeSet<String>> {
        Ok(self.lookup(&normalize_entity(entity)?))
    }

    /// Up to `window` catalogued chunks of `doc_id` before `position`, in
    /// document order.
    fn preceding<'s>(
        &'s self,
        pending: &'s BTreeMap<(&str, usize), &str>,
        doc_id: &str,
        position: usize,
        window: usize,
    ) -> Vec<&'s str> {
        let mut found: Vec<(usize, &str)> = self
            .chunk_catalog
            .values()
            .filter(|c| c.doc_id == doc_id && c.position < position)
            .map(|c| (c.position, c.text.as_str()))
            .chain(
                pending
                    .range((doc_id, 0)..(doc_id, position))
                    .map(|(&(_, p), &t)| (p, t)),
            )
            .collect();
        found.sort_by_key(|(p, _)| *p);
        let skip = found.len().saturating_sub(window);
        found.into_iter().skip(skip).map(|(_, t)| t).collect()
    }

    fn validate_new(&self, chunks: &[Chunk]) -> Result<()> {
        let mut seen = BTreeSet::new();
        let mut last: BTreeMap<&str, usize> = BTreeMap::new();
        for c in self.chunk_catalog.values() {
            let p = last.entry(&c.doc_id).or_insert(c.position);
            *p = (*p).max(c.position);
        }
        for c in chunks {
            if c.chunk_id != crate::corpus::chunk_id(&c.doc_id, c.position) {
                return Err(Error::InvalidParam(format!(
                    "chunk id {:?} does not match its document and position",
                    c.chunk_id
                )));
            }
            if self.chunk_catalog.contains_key(&c.chunk_id) || !seen.insert(c.chunk_id.as_str()) {
                return Err(Error::DuplicateChunk(c.chunk_id.clone()));
            }
            if let Some(&max) = last.get(c.doc_id.as_str()) {
                if c.position <= max {
                    return Err(Error::InvalidParam(format!(
                        "chunk {:?} would insert before already indexed chunks of {:?}; \
                         documents can only be extended at the end",
                        c.chunk_id, c.doc_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Index `chunks` into this index.
    ///
    /// All provider work happens before the index is touched, so on error
    /// the index is unchanged.
    pub fn add_chunks(&mut self, chunks: &[Chunk], pipeline: &Pipeline) -> Result<()> {
        pipeline.check(self)?;
        self.validate_new(chunks)?;
        if chunks.is_empty() {
            return Ok(());
        }
        let config = pipeline.extractor.config();
        let window = if config.coreference_enabled { config.coref_window } else { 0 };
        let pending: BTreeMap<(&str, usize), &str> = chunks
            .iter()
            .map(|c| ((c.doc_id.as_str(), c.position), c.text.as_str()))
            .collect();
        let tokenizer = pipeline.tokenizer;

        let extracted = exec::try_map(pipeline.execution, chunks, |c| {
            let context = self.preceding(&pending, &c.doc_id, c.position, window);
            let ex = pipeline.extractor.extract(&c.text, &context)?;
            let usage = ex.exchange.usage(tokenizer);
            Ok::<_, Error>(ChunkEntities {
                chunk_id: c.chunk_id.clone(),
                entities: ex.entities,
                prompt_in: usage.input,
                out: usage.output,
            })
        })?;

        let fresh: Vec<CanonicalEntity> = extracted
            .iter()
            .flat_map(|x| x.entities.iter())
            .filter(|e| !self.entities.contains(*e))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let batches: Vec<&[CanonicalEntity]> = fresh.chunks(EMBED_BATCH).collect();
        let vectors = exec::try_map(pipeline.execution, &batches, |batch| {
            let texts: Vec<&str> = batch.iter().map(CanonicalEntity::as_str).collect();
            let vs = pipeline.embedder.embed_batch(&texts)?;
            if vs.len() != texts.len() {
                return Err(Error::Provider(format!(
                    "embedder returned {} vectors for {} inputs",
                    vs.len(),
                    texts.len()
                )));
            }
            Ok(vs)
        })?;

        let mut vector_store = self.vectors.clone();
        for (entity, v) in fresh.iter().zip(vectors.into_iter().flatten()) {
            vector_store.insert(entity.clone(), v)?;
        }

        let mut accounting = TokenAccounting::default();
        for x in &extracted {
            accounting.record(Source::ExtractionPromptIn, x.prompt_in);
            accounting.record(Source::ExtractionOut, x.out);
        }
        let embed_in: u64 = fresh.iter().map(|e| tokenizer.count(e.as_str())).sum();
        accounting.record(Source::EmbeddingIn, embed_in);
        accounting.tctc = chunks.iter().map(|c| tokenizer.count(&c.text)).sum();

        self.vectors = vector_store;
        self.accounting.absorb(&accounting);
        for x in extracted {
            for e in x.entities {
                self.entities.insert(e.clone());
                self.inverted_map.entry(e).or_default().insert(x.chunk_id.clone());
            }
        }
        for c in chunks {
            self.chunk_catalog.insert(
                c.chunk_id.clone(),
                CatalogEntry {
                    doc_id: c.doc_id.clone(),
                    position: c.position,
                    text: c.text.clone(),
                    token_count: tokenizer.count(&c.text),
                },
            );
        }
        Ok(())
    }

    /// Check the structural invariants that do not need a provider.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::UnsupportedSchema {
                found: self.schema.clone(),
                expected: SCHEMA,
            });
        }
        if !self.inverted_map.keys().eq(self.entities.iter()) {
            return Err(Error::Corrupt("inverted map keys differ from the entity set".into()));
        }
        if !self.vectors.entries.keys().eq(self.entities.iter()) {
            return Err(Error::Corrupt("vector store keys differ from the entity set".into()));
        }
        for (e, ids) in &self.inverted_map {
            if ids.is_empty() {
                return Err(Error::Corrupt(format!("entity {e:?} maps to no chunks")));
            }
            if let Some(id) = ids.iter().find(|id| !self.chunk_catalog.contains_key(*id)) {
                return Err(Error::Corrupt(format!("entity {e:?} maps to unknown chunk {id:?}")));
            }
        }
        for (id, c) in &self.chunk_catalog {
            if *id != crate::corpus::chunk_id(&c.doc_id, c.position) {
                return Err(Error::Corrupt(format!("catalog key {id:?} does not match its entry")));
            }
        }
        let tctc: u64 = self.chunk_catalog.values().map(|c| c.token_count).sum();
        if tctc != self.accounting.tctc {
            return Err(Error::Corrupt("tctc differs from the catalog token total".into()));
        }
        let indexing: u64 = self
            .accounting
            .breakdown
            .0
            .iter()
            .filter(|(s, _)| s.is_indexing())
            .map(|(_, n)| n)
            .sum();
        if indexing != self.accounting.tuic {
            return Err(Error::Corrupt("tuic differs from the indexing breakdown".into()));
        }
        Ok(())
    }
}

pub fn build_index(corpus: &Corpus, pipeline: &Pipeline) -> Result<EntityIndex> {
    if corpus.policy != pipeline.policy || corpus.tokenizer != pipeline.tokenizer {
        return Err(Error::InvalidParam(
            "corpus segmentation or tokenizer differs from the pipeline".into(),
        ));
    }
    let mut index = EntityIndex::empty(pipeline);
    index.add_chunks(&corpus.chunks, pipeline)?;
    Ok(index)
}

pub fn add_chunks(mut index: EntityIndex, chunks: &[Chunk], pipeline: &Pipeline) -> Result<EntityIndex> {
    index.add_chunks(chunks, pipeline)?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SentenceSplitter;
    use crate::embedding::LocalEmbedder;
    use crate::extraction::{extract_entities, LocalExtractor};

    fn corpus(docs: &[(&str, &str)]) -> Corpus {
        Corpus::from_documents(
            docs.iter().copied(),
            SegmentationPolicy::default(),
            &SentenceSplitter::default(),
            Tokenizer::default(),
        )
        .unwrap()
    }

    fn ids(set: &BTreeSet<String>) -> Vec<&str> {
        set.iter().map(String::as_str).collect()
    }

    #[test]
    fn empty_corpus() {
        let (x, e) = (LocalExtractor::default(), LocalEmbedder::default());
        let p = Pipeline::new(&x, &e);
        let idx = build_index(&corpus(&[]), &p).unwrap();
        assert!(idx.entities.is_empty() && idx.inverted_map.is_empty());
        assert_eq!(idx.accounting, TokenAccounting::default());
        idx.validate().unwrap();
    }

    #[test]
    fn shared_entity_maps_to_both_chunks_once() {
        let (x, e) = (LocalExtractor::default(), LocalEmbedder::default());
        let p = Pipeline::new(&x, &e);
        let c = corpus(&[
            ("a", "Paris is large. Paris and Paris again in Paris."),
            ("b", "Marie Curie lived in Paris."),
        ]);
        let idx = build_index(&c, &p).unwrap();
        assert_eq!(ids(idx.lookup_raw("  Paris ").unwrap()), ["a#0", "a#1", "b#0"]);
        assert!(idx.lookup_raw("london").unwrap().is_empty());
        idx.validate().unwrap();
    }

    #[test]
    fn inverted_map_matches_re_extraction() {
        let x = LocalExtractor::with_toggles(false, false);
        let e = LocalEmbedder::default();
        let c = corpus(&[
            ("a", "Ada Lovelace met Charles Babbage in London. She wrote notes."),
            ("b", "The Royal Society met in London. Babbage attended."),
        ]);
        let idx = build_index(&c, &Pipeline::new(&x, &e)).unwrap();
        for (id, entry) in &idx.chunk_catalog {
            let found = extract_entities(&entry.text, &x).unwrap();
            for ent in &idx.entities {
                assert_eq!(idx.lookup(ent).contains(id), found.contains(ent), "{id} {ent}");
            }
            assert!(found.is_subset(&idx.entities));
        }
    }

    #[test]
    fn accounting_matches_breakdown_and_corpus() {
        let (x, e) = (LocalExtractor::default(), LocalEmbedder::default());
        let p = Pipeline::new(&x, &e);
        let c = corpus(&[("a", "Barack Obama visited Paris. He spoke there.")]);
        let idx = build_index(&c, &p).unwrap();
        assert_eq!(idx.accounting.tctc, c.total_corpus_tokens);
        assert_eq!(idx.accounting.tuic, idx.accounting.breakdown.total());
        // "barack obama" and "paris" embedded once each
        assert_eq!(idx.accounting.breakdown.get(Source::EmbeddingIn), 3);
    }

    #[test]
    fn add_rejects_duplicates_mismatch_and_inserts() {
        let (x, e) = (LocalExtractor::default(), LocalEmbedder::default());
        let p = Pipeline::new(&x, &e);
        let c = corpus(&[("a", "One Alpha. Two Beta. Three Gamma.")]);
        let mut idx = build_index(&c, &p).unwrap();
        let before = idx.clone();
        assert!(matches!(
            idx.add_chunks(&c.chunks[..1], &p),
            Err(Error::DuplicateChunk(_))
        ));
        let early = Chunk::new("a", 1, "x", Tokenizer::default());
        let mut trimmed = build_index(&corpus(&[("a", "One Alpha.")]), &p).unwrap();
        trimmed.add_chunks(&[Chunk::new("a", 2, "Later Gamma.", Tokenizer::default())], &p).unwrap();
        assert!(trimmed.add_chunks(&[early], &p).is_err());
        let other = LocalExtractor::with_toggles(false, true);
        let q = Pipeline::new(&other, &e);
        assert!(matches!(
            idx.add_chunks(&[Chunk::new("b", 0, "New Doc.", Tokenizer::default())], &q),
            Err(Error::FingerprintMismatch { .. })
        ));
        idx.add_chunks(&[], &p).unwrap();
        assert_eq!(idx, before);
    }

    #[test]
    fn decomposition_toggle_does_not_change_fingerprint() {
        let e = LocalEmbedder::default();
        let a = LocalExtractor::with_toggles(true, true);
        let b = LocalExtractor::with_toggles(true, false);
        assert_eq!(Pipeline::new(&a, &e).fingerprint(), Pipeline::new(&b, &e).fingerprint());
        let c = LocalExtractor::with_toggles(false, true);
        assert_ne!(Pipeline::new(&a, &e).fingerprint(), Pipeline::new(&c, &e).fingerprint());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let (x, e) = (LocalExtractor::default(), LocalEmbedder::default());
        let c = corpus(&[
            ("a", "Ada Lovelace met Charles Babbage. She wrote notes on his engine."),
            ("b", "The Analytical Engine was designed in London. It was never finished."),
        ]);
        let s = build_index(&c, &Pipeline::new(&x, &e).with_execution(Execution::Sequential)).unwrap();
        let par = build_index(&c, &Pipeline::new(&x, &e).with_execution(Execution::Parallel)).unwrap();
        assert_eq!(s, par);
    }
}
