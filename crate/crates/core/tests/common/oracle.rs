//! Straight-line retrieval reference, written without the crate's
//! retrieval code: own cosine, own exhaustive sort, own budget loop.

use std::collections::{BTreeMap, BTreeSet};

use slimrag::{Embedder, EntityExtractor, EntityIndex, RetrievalParams, Tokenizer};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub sub_queries: Vec<String>,
    pub query_entities: BTreeSet<String>,
    pub hit_entities: BTreeSet<String>,
    pub candidates: BTreeSet<String>,
    pub scores: BTreeMap<String, f64>,
    /// Top-H in rank order.
    pub selected: Vec<String>,
    /// Final context, in document order.
    pub context: Vec<String>,
    pub fallback: bool,
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / (na.sqrt() * nb.sqrt())
}

fn embed(embedder: &dyn Embedder, text: &str) -> Vec<f64> {
    embedder.embed_batch(&[text]).unwrap().remove(0).values().to_vec()
}

pub fn run(
    index: &EntityIndex,
    q: &str,
    params: &RetrievalParams,
    extractor: &dyn EntityExtractor,
    embedder: &dyn Embedder,
    tokenizer: Tokenizer,
) -> OracleRun {
    // Q_sub <- DecomposeQuery(q)
    let sub_queries = extractor.decompose(q).unwrap().sub_queries;

    // E_Q <- union of ExtractEntities(q_i); W_e <- share of sub-queries naming e
    let mut per_sub: Vec<BTreeSet<String>> = Vec::new();
    for i in 0..sub_queries.len() {
        let ctx: Vec<&str> = sub_queries[..i].iter().map(|s| s.as_str()).collect();
        let found = extractor.extract(&sub_queries[i], &ctx).unwrap().entities;
        per_sub.push(found.iter().map(|e| e.as_str().to_owned()).collect());
    }
    let mut query_entities = BTreeSet::new();
    for s in &per_sub {
        query_entities.extend(s.iter().cloned());
    }
    let mut weight: BTreeMap<String, f64> = BTreeMap::new();
    for e in &query_entities {
        let n = per_sub.iter().filter(|s| s.contains(e)).count();
        weight.insert(e.clone(), n as f64 / per_sub.len() as f64);
    }

    let mut out = OracleRun {
        sub_queries,
        query_entities: query_entities.clone(),
        hit_entities: BTreeSet::new(),
        candidates: BTreeSet::new(),
        scores: BTreeMap::new(),
        selected: Vec::new(),
        context: Vec::new(),
        fallback: false,
    };
    if index.chunk_catalog.is_empty() {
        return out;
    }

    // E_H <- union over e in E_Q of the K nearest indexed entities
    let mut best_weight: BTreeMap<String, f64> = BTreeMap::new();
    for e in &query_entities {
        let v = embed(embedder, e);
        let mut all: Vec<(String, f64)> = index
            .vectors
            .entries
            .iter()
            .map(|(name, vec)| (name.as_str().to_owned(), cos(&v, vec.values())))
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (name, sim) in all.into_iter().take(params.k) {
            if let Some(t) = params.min_similarity {
                if sim < t {
                    continue;
                }
            }
            out.hit_entities.insert(name.clone());
            let w = best_weight.entry(name).or_insert(0.0);
            *w = w.max(weight[e]);
        }
    }

    // C_H <- union of M(e) over E_H
    for e in &out.hit_entities {
        for (entity, ids) in &index.inverted_map {
            if entity.as_str() == e {
                out.candidates.extend(ids.iter().cloned());
            }
        }
    }
    if out.hit_entities.is_empty() {
        if !params.fallback_on_no_entities {
            return out;
        }
        out.fallback = true;
        out.candidates = index.chunk_catalog.keys().cloned().collect();
    }

    // score_k <- phi_q * count_k
    let qv = embed(embedder, q);
    for id in &out.candidates {
        let text = &index.chunk_catalog[id].text;
        let phi = cos(&embed(embedder, text), &qv);
        let hits: Vec<&String> = out
            .hit_entities
            .iter()
            .filter(|e| index.inverted_map.iter().any(|(k, ids)| k.as_str() == e.as_str() && ids.contains(id)))
            .collect();
        let factor = if out.fallback {
            1.0
        } else if params.use_entity_weights {
            hits.iter().map(|e| best_weight[*e]).sum()
        } else {
            hits.len() as f64
        };
        out.scores.insert(id.clone(), phi * factor);
    }

    // C_top <- top-H by score (ties: chunk id)
    let mut ranked: Vec<(&String, f64)> = out.scores.iter().map(|(k, v)| (k, *v)).collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(b.0)));
    out.selected = ranked.iter().take(params.h).map(|(k, _)| (*k).clone()).collect();

    // drop the weakest until the merged text fits
    let mut kept = out.selected.clone();
    loop {
        let mut ordered = kept.clone();
        ordered.sort_by_key(|id| {
            let c = &index.chunk_catalog[id];
            (c.doc_id.clone(), c.position)
        });
        let merged: Vec<&str> = ordered.iter().map(|id| index.chunk_catalog[id].text.as_str()).collect();
        if tokenizer.count(&merged.join("\n")) <= params.token_limit {
            out.context = ordered;
            break;
        }
        kept.pop();
    }
    out
}
