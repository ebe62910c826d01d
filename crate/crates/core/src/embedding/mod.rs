//! Embeddings, cosine similarity and exhaustive top-K entity search.

mod cache;
mod local;
#[cfg(feature = "remote")]
mod remote;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cache::{CachedEmbedder, EmbeddingCache};
pub use local::{LocalEmbedder, DEFAULT_DIM, DEFAULT_SEED};
#[cfg(feature = "remote")]
pub use remote::RemoteEmbedder;

use crate::error::{Error, Result};
use crate::extraction::CanonicalEntity;

/// A finite, non-empty embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteVector);
        }
        Ok(Vector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub fn cosine_similarity(a: &Vector, b: &Vector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderConfig {
    Local { dim: usize, seed: u64 },
    Remote { model: String, batch_size: usize },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Local {
            dim: DEFAULT_DIM,
            seed: DEFAULT_SEED,
        }
    }
}

impl EmbedderConfig {
    pub fn embedder_id(&self) -> String {
        match self {
            EmbedderConfig::Local { dim, seed } => format!("local-ngram-v1:d={dim}:seed={seed:#x}"),
            EmbedderConfig::Remote { model, .. } => format!("remote:{model}"),
        }
    }
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;

    /// Known output dimension, if any before the first call.
    fn dimension(&self) -> Option<usize>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vector>>;

    fn embed(&self, text: &str) -> Result<Vector> {
        self.embed_batch(&[text])?
            .pop()
            .ok_or_else(|| Error::Provider("embedder returned no vector".into()))
    }
}

/// Entity vectors of one index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityVectorStore {
    pub dimension: usize,
    pub embedder_id: String,
    pub entries: BTreeMap<CanonicalEntity, Vector>,
}

impl EntityVectorStore {
    pub fn new(embedder_id: impl Into<String>, dimension: usize) -> Self {
        EntityVectorStore {
            dimension,
            embedder_id: embedder_id.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, entity: CanonicalEntity, vector: Vector) -> Result<()> {
        if self.dimension == 0 {
            self.dimension = vector.dim();
        }
        if vector.dim() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: vector.dim(),
            });
        }
        self.entries.insert(entity, vector);
        Ok(())
    }
}

/// Descending similarity, then ascending entity string.
pub(crate) fn rank_order(a: &(CanonicalEntity, f64), b: &(CanonicalEntity, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// The `k` entities most similar to `query`, by exhaustive scan.
pub fn top_k_entities(
    query: &Vector,
    store: &EntityVectorStore,
    k: usize,
) -> Result<Vec<(CanonicalEntity, f64)>> {
    if k == 0 {
        return Err(Error::InvalidParam("K must be at least 1".into()));
    }
    if store.is_empty() {
        return Ok(Vec::new());
    }
    if query.dim() != store.dimension {
        return Err(Error::DimensionMismatch {
            expected: store.dimension,
            actual: query.dim(),
        });
    }
    let mut scored = store
        .entries
        .iter()
        .map(|(e, v)| Ok((e.clone(), cosine_similarity(query, v)?)))
        .collect::<Result<Vec<_>>>()?;
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::normalize_entity;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn cosine_basics() {
        let a = v(&[1.0, 0.0]);
        assert_eq!(cosine_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&a, &v(&[0.0, 3.0])).unwrap(), 0.0);
        let c = cosine_similarity(&a, &v(&[1.0, 1.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!(matches!(
            cosine_similarity(&a, &v(&[1.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(cosine_similarity(&a, &v(&[0.0, 0.0])), Err(Error::ZeroVector)));
        assert!(Vector::new(vec![f64::NAN]).is_err());
    }

    fn store(items: &[(&str, &[f64])]) -> EntityVectorStore {
        let mut s = EntityVectorStore::new("test", 0);
        for (name, vals) in items {
            s.insert(normalize_entity(name).unwrap(), v(vals)).unwrap();
        }
        s
    }

    #[test]
    fn top_k_ties_break_lexicographically() {
        let s = store(&[("zeta", &[1.0, 0.0]), ("alpha", &[2.0, 0.0]), ("mid", &[1.0, 1.0])]);
        let got = top_k_entities(&v(&[1.0, 0.0]), &s, 10).unwrap();
        let names: Vec<_> = got.iter().map(|(e, _)| e.as_str()).collect();
        assert_eq!(names, ["alpha", "zeta", "mid"]);
        let got = top_k_entities(&v(&[1.0, 0.0]), &s, 1).unwrap();
        assert_eq!(got[0].0.as_str(), "alpha");
        assert!(top_k_entities(&v(&[1.0, 0.0]), &EntityVectorStore::new("t", 2), 5).unwrap().is_empty());
        assert!(top_k_entities(&v(&[1.0, 0.0]), &s, 0).is_err());
    }

    #[test]
    fn top_two_of_five_matches_full_sort() {
        let s = store(&[
            ("a", &[1.0, 0.1]),
            ("b", &[0.2, 1.0]),
            ("c", &[1.0, 0.9]),
            ("d", &[-1.0, 0.0]),
            ("e", &[0.7, 0.7]),
        ]);
        let q = v(&[1.0, 0.5]);
        // full sort by hand-written comparator
        let mut all: Vec<(String, f64)> = s
            .entries
            .iter()
            .map(|(e, x)| {
                let dot = x.values()[0] * 1.0 + x.values()[1] * 0.5;
                (e.to_string(), dot / (x.norm() * 1.25f64.sqrt()))
            })
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let got = top_k_entities(&q, &s, 2).unwrap();
        assert_eq!(got.iter().map(|(e, _)| e.to_string()).collect::<Vec<_>>(), [all[0].0.clone(), all[1].0.clone()]);
    }

    fn arb_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, dim)
            .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn symmetric_and_scale_invariant(a in arb_vec(6), b in arb_vec(6), c in 0.01f64..100.0) {
            let (va, vb) = (v(&a), v(&b));
            let ab = cosine_similarity(&va, &vb).unwrap();
            prop_assert!((ab - cosine_similarity(&vb, &va).unwrap()).abs() <= 1e-12);
            let scaled = v(&a.iter().map(|x| x * c).collect::<Vec<_>>());
            prop_assert!((cosine_similarity(&scaled, &vb).unwrap() - ab).abs() <= 1e-9);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn full_k_is_a_sorted_permutation(vecs in proptest::collection::vec(arb_vec(4), 1..30), q in arb_vec(4)) {
            let mut s = EntityVectorStore::new("t", 4);
            for (i, x) in vecs.iter().enumerate() {
                s.insert(normalize_entity(&format!("e{i}")).unwrap(), v(x)).unwrap();
            }
            let got = top_k_entities(&v(&q), &s, s.len()).unwrap();
            prop_assert_eq!(got.len(), s.len());
            prop_assert!(got.windows(2).all(|w| w[0].1 >= w[1].1));
            let mut names: Vec<_> = got.iter().map(|(e, _)| e.clone()).collect();
            names.sort();
            prop_assert_eq!(names, s.entries.keys().cloned().collect::<Vec<_>>());
        }
    }
}
