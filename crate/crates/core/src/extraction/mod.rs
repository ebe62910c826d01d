//! Entity extraction, query decomposition and query planning.

mod local;
mod normalize;
pub mod prompts;
#[cfg(feature = "remote")]
mod remote;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use local::Gazetteer;
pub use normalize::{normalize_entity, CanonicalEntity};
pub use prompts::ChatMessage;
#[cfg(feature = "remote")]
pub use remote::RemoteExtractor;

use crate::accounting::{Source, TokenLedger, Usage};
use crate::error::{Error, Result};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExtractorProvider {
    Local {
        gazetteer_digest: Option<String>,
    },
    Remote {
        model: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub provider: ExtractorProvider,
    pub coreference_enabled: bool,
    pub decomposition_enabled: bool,
    /// Number of preceding chunks of the same document offered as
    /// coreference context.
    pub coref_window: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            provider: ExtractorProvider::Local {
                gazetteer_digest: None,
            },
            coreference_enabled: true,
            decomposition_enabled: true,
            coref_window: 3,
        }
    }
}

impl ExtractorConfig {
    /// The part of the configuration that shapes index contents.
    /// Decomposition only affects retrieval and is left out.
    pub fn index_identity(&self) -> serde_json::Value {
        serde_json::json!({
            "provider": self.provider,
            "coreference_enabled": self.coreference_enabled,
            "coref_window": if self.coreference_enabled { self.coref_window } else { 0 },
            "prompt_version": prompts::PROMPT_VERSION,
        })
    }
}

/// The messages a provider call sends and the reply it receives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub messages: Vec<ChatMessage>,
    pub reply: String,
}

impl Exchange {
    pub fn usage(&self, tokenizer: Tokenizer) -> Usage {
        Usage {
            input: self.messages.iter().map(|m| tokenizer.count(&m.content)).sum(),
            output: tokenizer.count(&self.reply),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub entities: BTreeSet<CanonicalEntity>,
    pub exchange: Exchange,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub sub_queries: Vec<String>,
    /// `None` when decomposition is disabled and no provider was called.
    pub exchange: Option<Exchange>,
}

pub trait EntityExtractor: Send + Sync {
    fn config(&self) -> &ExtractorConfig;

    /// Entities mentioned in `text`. `context` is preceding text used only
    /// to resolve coreference; it is ignored when coreference is off.
    fn extract(&self, text: &str, context: &[&str]) -> Result<Extraction>;

    /// Split `query` into sub-queries; `[query]` when decomposition is off.
    fn decompose(&self, query: &str) -> Result<Decomposition>;
}

/// Deterministic offline extractor.
#[derive(Debug, Clone)]
pub struct LocalExtractor {
    config: ExtractorConfig,
    gazetteer: Gazetteer,
}

impl LocalExtractor {
    /// `config.provider` is replaced by the local provider with this
    /// gazetteer's digest.
    pub fn new(mut config: ExtractorConfig, gazetteer: Gazetteer) -> Self {
        config.provider = ExtractorProvider::Local {
            gazetteer_digest: (!gazetteer.is_empty()).then(|| gazetteer.digest()),
        };
        LocalExtractor { config, gazetteer }
    }

    pub fn with_toggles(coreference: bool, decomposition: bool) -> Self {
        let config = ExtractorConfig {
            coreference_enabled: coreference,
            decomposition_enabled: decomposition,
            ..ExtractorConfig::default()
        };
        LocalExtractor::new(config, Gazetteer::default())
    }
}

impl Default for LocalExtractor {
    fn default() -> Self {
        LocalExtractor::new(ExtractorConfig::default(), Gazetteer::default())
    }
}

impl EntityExtractor for LocalExtractor {
    fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    fn extract(&self, text: &str, context: &[&str]) -> Result<Extraction> {
        let coref = self.config.coreference_enabled;
        let context = if coref { context } else { &[] };
        let entities = local::extract(text, context, &self.gazetteer, coref);
        let names: Vec<&str> = entities.iter().map(CanonicalEntity::as_str).collect();
        Ok(Extraction {
            exchange: Exchange {
                messages: prompts::extraction_messages(text, context, coref),
                reply: serde_json::to_string(&names)?,
            },
            entities,
        })
    }

    fn decompose(&self, query: &str) -> Result<Decomposition> {
        if query.trim().is_empty() {
            return Err(Error::EmptyQuery);
        }
        if !self.config.decomposition_enabled {
            return Ok(Decomposition {
                sub_queries: vec![query.to_owned()],
                exchange: None,
            });
        }
        let sub_queries = local::decompose(query);
        Ok(Decomposition {
            exchange: Some(Exchange {
                messages: prompts::decomposition_messages(query),
                reply: serde_json::to_string(&sub_queries)?,
            }),
            sub_queries,
        })
    }
}

/// Convenience wrapper: the entity set of `text` with no context.
pub fn extract_entities(text: &str, extractor: &dyn EntityExtractor) -> Result<BTreeSet<CanonicalEntity>> {
    Ok(extractor.extract(text, &[])?.entities)
}

pub fn decompose_query(query: &str, extractor: &dyn EntityExtractor) -> Result<Vec<String>> {
    Ok(extractor.decompose(query)?.sub_queries)
}

/// `weight(e) = |{s : e in entities(s)}| / |sub-queries|`.
pub fn compute_entity_weights(
    query_entities: &BTreeSet<CanonicalEntity>,
    per_sub_query: &[BTreeSet<CanonicalEntity>],
) -> Result<BTreeMap<CanonicalEntity, f64>> {
    if per_sub_query.is_empty() {
        return Err(Error::EmptySubQueries);
    }
    let n = per_sub_query.len() as f64;
    query_entities
        .iter()
        .map(|e| {
            let hits = per_sub_query.iter().filter(|s| s.contains(e)).count();
            if hits == 0 {
                Err(Error::InvalidParam(format!(
                    "entity {e:?} does not occur in any sub-query"
                )))
            } else {
                Ok((e.clone(), hits as f64 / n))
            }
        })
        .collect()
}

/// Sub-queries, query entities and their weights for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub query: String,
    pub sub_queries: Vec<String>,
    pub query_entities: BTreeSet<CanonicalEntity>,
    pub entity_weights: BTreeMap<CanonicalEntity, f64>,
    /// Query-time provider tokens (never part of TUIC).
    pub usage: TokenLedger,
}

/// Decompose, extract entities from every sub-query (earlier sub-queries
/// serve as coreference context), and weight them.
pub fn plan_query(query: &str, extractor: &dyn EntityExtractor, tokenizer: Tokenizer) -> Result<QueryPlan> {
    if query.trim().is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut usage = TokenLedger::default();
    let decomposition = extractor.decompose(query)?;
    if let Some(ex) = &decomposition.exchange {
        let u = ex.usage(tokenizer);
        usage.add(Source::DecompositionIn, u.input);
        usage.add(Source::DecompositionOut, u.output);
    }
    let sub_queries = decomposition.sub_queries;
    if sub_queries.is_empty() {
        return Err(Error::EmptySubQueries);
    }
    let mut per_sub = Vec::with_capacity(sub_queries.len());
    for (i, sq) in sub_queries.iter().enumerate() {
        let context: Vec<&str> = sub_queries[..i].iter().map(String::as_str).collect();
        let ex = extractor.extract(sq, &context)?;
        let u = ex.exchange.usage(tokenizer);
        usage.add(Source::ExtractionPromptIn, u.input);
        usage.add(Source::ExtractionOut, u.output);
        per_sub.push(ex.entities);
    }
    let query_entities: BTreeSet<CanonicalEntity> = per_sub.iter().flatten().cloned().collect();
    let entity_weights = compute_entity_weights(&query_entities, &per_sub)?;
    Ok(QueryPlan {
        query: query.to_owned(),
        sub_queries,
        query_entities,
        entity_weights,
        usage,
    })
}
