//! Query-time retrieval: plan the query, match its entities against the
//! index, score the chunks those entities point to, and assemble a
//! position-ordered context under a token budget.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, top_k_entities, Embedder, Vector};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::extraction::{plan_query, CanonicalEntity, QueryPlan};
use crate::index::{EntityIndex, Pipeline};
use crate::tokenizer::Tokenizer;

/// Separator placed between chunk texts in the merged context.
pub const CONTEXT_SEPARATOR: &str = "\n";

/// Chunks embedded per provider call while scoring.
const SCORE_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalParams {
    /// Nearest indexed entities taken per query entity.
    pub k: usize,
    /// Chunks kept in the context.
    pub h: usize,
    pub token_limit: u64,
    pub use_entity_weights: bool,
    pub fallback_on_no_entities: bool,
    /// Drop entity matches below this cosine similarity.
    pub min_similarity: Option<f64>,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        RetrievalParams {
            k: 5,
            h: 10,
            token_limit: 4096,
            use_entity_weights: false,
            fallback_on_no_entities: true,
            min_similarity: None,
        }
    }
}

impl RetrievalParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.h == 0 || self.token_limit == 0 {
            return Err(Error::InvalidParam("k, h and token_limit must be at least 1".into()));
        }
        if let Some(t) = self.min_similarity {
            if !t.is_finite() {
                return Err(Error::InvalidParam("min_similarity must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn variant(&self) -> ScoreVariant {
        if self.use_entity_weights {
            ScoreVariant::WeightedHits
        } else {
            ScoreVariant::HitCount
        }
    }
}

/// How the second scoring factor is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreVariant {
    /// `phi_q * count_k`.
    HitCount,
    /// `phi_q * sum over hit entities of the largest weight among the query
    /// entities that matched it`.
    WeightedHits,
    /// `phi_q` alone, used when no entity matched.
    SimilarityOnly,
}

/// A matched index entity with the best similarity over the query entities
/// that reached it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitEntity {
    pub entity: CanonicalEntity,
    pub similarity: f64,
    pub sources: BTreeSet<CanonicalEntity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: String,
    pub phi_q: f64,
    pub hit_count: usize,
    pub score: f64,
    pub hit_entities: BTreeSet<CanonicalEntity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrievalPath {
    EntityGuided,
    /// No entity matched; every chunk was scored by query similarity.
    SimilarityFallback,
    /// Nothing was scored.
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFlags {
    pub empty_index: bool,
    pub no_entity_hits: bool,
    /// Every selected chunk exceeded the token limit on its own.
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub plan: QueryPlan,
    pub params: RetrievalParams,
    pub variant: ScoreVariant,
    pub path: RetrievalPath,
    pub flags: TraceFlags,
    /// Sorted by entity.
    pub hit_entities: Vec<HitEntity>,
    pub candidate_count: usize,
    /// In rank order.
    pub scored: Vec<ScoredChunk>,
    /// Top-H chunk ids in rank order, before the budget is applied.
    pub selected: Vec<String>,
    /// Chunks removed to meet the budget, in removal order.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub position: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    /// Ordered by `(doc_id, position)`.
    pub chunks: Vec<ContextChunk>,
    pub text: String,
    pub total_tokens: u64,
    pub trace: Trace,
}

impl Context {
    pub fn chunk_ids(&self) -> impl Iterator<Item = &str> {
        self.chunks.iter().map(|c| c.chunk_id.as_str())
    }
}

/// Union of the top-`k` index entities of every query entity.
pub fn match_query_entities(
    query_entities: &BTreeSet<CanonicalEntity>,
    index: &EntityIndex,
    k: usize,
    min_similarity: Option<f64>,
    embedder: &dyn Embedder,
) -> Result<Vec<HitEntity>> {
    if query_entities.is_empty() || index.vectors.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<&str> = query_entities.iter().map(CanonicalEntity::as_str).collect();
    let vectors = embedder.embed_batch(&texts)?;
    let mut hits: BTreeMap<CanonicalEntity, HitEntity> = BTreeMap::new();
    for (source, v) in query_entities.iter().zip(&vectors) {
        for (entity, sim) in top_k_entities(v, &index.vectors, k)? {
            if min_similarity.is_some_and(|t| sim < t) {
                continue;
            }
            let hit = hits.entry(entity.clone()).or_insert_with(|| HitEntity {
                entity,
                similarity: sim,
                sources: BTreeSet::new(),
            });
            hit.similarity = hit.similarity.max(sim);
            hit.sources.insert(source.clone());
        }
    }
    Ok(hits.into_values().collect())
}

/// For every chunk reachable from `hits`, the hit entities that map to it.
pub fn collect_hit_chunks<'a, I>(hits: I, index: &EntityIndex) -> BTreeMap<String, BTreeSet<CanonicalEntity>>
where
    I: IntoIterator<Item = &'a CanonicalEntity>,
{
    let mut out: BTreeMap<String, BTreeSet<CanonicalEntity>> = BTreeMap::new();
    for e in hits {
        for id in index.lookup(e) {
            out.entry(id.clone()).or_default().insert(e.clone());
        }
    }
    out
}

/// `phi_q * factor`, where `factor` is the hit count or the weighted sum.
pub fn dual_factor_score(phi_q: f64, factor: f64) -> f64 {
    phi_q * factor
}

/// Query similarity of one chunk and its score for `factor`.
pub fn score_chunk(chunk_text: &str, q_vec: &Vector, factor: f64, embedder: &dyn Embedder) -> Result<(f64, f64)> {
    let phi = cosine_similarity(&embedder.embed(chunk_text)?, q_vec)?;
    Ok((phi, dual_factor_score(phi, factor)))
}

/// Score descending, then chunk id ascending.
pub fn rank(scored: &mut [ScoredChunk]) {
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.chunk_id.cmp(&b.chunk_id)));
}

/// Outcome of selecting and trimming ranked chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembly {
    pub selected: Vec<String>,
    pub dropped: Vec<String>,
    pub chunks: Vec<ContextChunk>,
    pub text: String,
    pub total_tokens: u64,
}

/// Take the top `h` of `ranked`, drop the lowest-ranked until the merged
/// text fits `token_limit`, then restore document order.
pub fn assemble_context(
    ranked: &[ScoredChunk],
    index: &EntityIndex,
    h: usize,
    token_limit: u64,
    tokenizer: Tokenizer,
) -> Result<Assembly> {
    let selected: Vec<&str> = ranked.iter().take(h).map(|s| s.chunk_id.as_str()).collect();
    let entry = |id: &str| {
        index
            .chunk_catalog
            .get(id)
            .ok_or_else(|| Error::Corrupt(format!("scored chunk {id:?} is not in the catalog")))
    };
    let mut kept = selected.clone();
    let mut dropped = Vec::new();
    let mut total: u64 = kept.iter().map(|id| entry(id).map(|c| c.token_count)).sum::<Result<u64>>()?;
    while total > token_limit {
        let id = kept.pop().expect("positive total implies a kept chunk");
        total -= entry(id)?.token_count;
        dropped.push(id.to_owned());
    }
    let mut chunks = kept
        .iter()
        .map(|id| {
            let c = entry(id)?;
            Ok(ContextChunk {
                chunk_id: (*id).to_owned(),
                doc_id: c.doc_id.clone(),
                position: c.position,
                text: c.text.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    chunks.sort_by(|a, b| (&a.doc_id, a.position).cmp(&(&b.doc_id, b.position)));
    let text = chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join(CONTEXT_SEPARATOR);
    let total_tokens = tokenizer.count(&text);
    debug_assert!(total_tokens <= token_limit);
    Ok(Assembly {
        selected: selected.into_iter().map(str::to_owned).collect(),
        dropped,
        chunks,
        text,
        total_tokens,
    })
}

fn embed_texts(embedder: &dyn Embedder, texts: &[&str], execution: Execution) -> Result<Vec<Vector>> {
    let batches: Vec<&[&str]> = texts.chunks(SCORE_BATCH).collect();
    let out = exec::try_map(execution, &batches, |b| embedder.embed_batch(b))?;
    Ok(out.into_iter().flatten().collect())
}

/// Retrieve a context for `query`.
pub fn retrieve(index: &EntityIndex, query: &str, params: &RetrievalParams, pipeline: &Pipeline) -> Result<Context> {
    params.validate()?;
    pipeline.check(index)?;
    let plan = plan_query(query, pipeline.extractor, pipeline.tokenizer)?;
    let mut flags = TraceFlags::default();
    let mut trace = Trace {
        plan,
        params: params.clone(),
        variant: params.variant(),
        path: RetrievalPath::None,
        flags: TraceFlags::default(),
        hit_entities: Vec::new(),
        candidate_count: 0,
        scored: Vec::new(),
        selected: Vec::new(),
        dropped: Vec::new(),
    };
    let empty = |trace: Trace| Context {
        chunks: Vec::new(),
        text: String::new(),
        total_tokens: 0,
        trace,
    };
    if index.is_empty() {
        flags.empty_index = true;
        trace.flags = flags;
        return Ok(empty(trace));
    }

    let embedder = pipeline.embedder;
    let hits = match_query_entities(
        &trace.plan.query_entities,
        index,
        params.k,
        params.min_similarity,
        embedder,
    )?;
    let candidates: BTreeMap<String, BTreeSet<CanonicalEntity>> = if hits.is_empty() {
        flags.no_entity_hits = true;
        if !params.fallback_on_no_entities {
            trace.flags = flags;
            return Ok(empty(trace));
        }
        trace.path = RetrievalPath::SimilarityFallback;
        trace.variant = ScoreVariant::SimilarityOnly;
        index.chunk_catalog.keys().map(|id| (id.clone(), BTreeSet::new())).collect()
    } else {
        trace.path = RetrievalPath::EntityGuided;
        collect_hit_chunks(hits.iter().map(|h| &h.entity), index)
    };

    let q_vec = embedder.embed(query)?;
    let ids: Vec<&String> = candidates.keys().collect();
    let texts: Vec<&str> = ids.iter().map(|id| index.chunk_catalog[*id].text.as_str()).collect();
    let vectors = embed_texts(embedder, &texts, pipeline.execution)?;

    let hit_weight: BTreeMap<&CanonicalEntity, f64> = hits
        .iter()
        .map(|h| {
            let w = h
                .sources
                .iter()
                .map(|s| trace.plan.entity_weights.get(s).copied().unwrap_or(0.0))
                .fold(0.0, f64::max);
            (&h.entity, w)
        })
        .collect();
    let variant = trace.variant;
    let rows: Vec<(&String, &Vector)> = ids.iter().copied().zip(&vectors).collect();
    let mut scored = exec::try_map(pipeline.execution, &rows, |(id, v)| {
        let hit_entities = candidates[*id].clone();
        let phi_q = cosine_similarity(v, &q_vec)?;
        let factor = match variant {
            ScoreVariant::HitCount => hit_entities.len() as f64,
            ScoreVariant::WeightedHits => hit_entities.iter().map(|e| hit_weight[e]).sum(),
            ScoreVariant::SimilarityOnly => 1.0,
        };
        Ok::<_, Error>(ScoredChunk {
            chunk_id: (*id).clone(),
            phi_q,
            hit_count: hit_entities.len(),
            score: dual_factor_score(phi_q, factor),
            hit_entities,
        })
    })?;
    rank(&mut scored);

    let assembly = assemble_context(&scored, index, params.h, params.token_limit, pipeline.tokenizer)?;
    flags.budget_exhausted = !assembly.selected.is_empty() && assembly.chunks.is_empty();
    trace.flags = flags;
    trace.hit_entities = hits;
    trace.candidate_count = candidates.len();
    trace.scored = scored;
    trace.selected = assembly.selected;
    trace.dropped = assembly.dropped;
    Ok(Context {
        chunks: assembly.chunks,
        text: assembly.text,
        total_tokens: assembly.total_tokens,
        trace,
    })
}
