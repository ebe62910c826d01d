use std::collections::BTreeSet;
use std::sync::Arc;

use serde_json::json;

use super::prompts::{self, ChatMessage};
use super::{
    normalize_entity, Decomposition, EntityExtractor, Exchange, Extraction, ExtractorConfig,
    ExtractorProvider,
};
use crate::error::{Error, Result};
use crate::http::HttpClient;

/// Chat-completions backed extractor (temperature pinned to 0).
#[derive(Debug, Clone)]
pub struct RemoteExtractor {
    config: ExtractorConfig,
    model: String,
    client: Arc<HttpClient>,
}

impl RemoteExtractor {
    pub fn new(mut config: ExtractorConfig, model: &str, client: Arc<HttpClient>) -> Self {
        config.provider = ExtractorProvider::Remote {
            model: model.to_owned(),
        };
        RemoteExtractor {
            config,
            model: model.to_owned(),
            client,
        }
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": 0.0,
        });
        let resp = self.client.post_json("chat/completions", &body)?;
        resp.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_owned)
            .ok_or_else(|| Error::Provider("chat response has no choices[0].message.content".into()))
    }
}

impl EntityExtractor for RemoteExtractor {
    fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    fn extract(&self, text: &str, context: &[&str]) -> Result<Extraction> {
        let coref = self.config.coreference_enabled;
        let context = if coref { context } else { &[] };
        let messages = prompts::extraction_messages(text, context, coref);
        let reply = self.complete(&messages)?;
        let names = prompts::parse_string_array(&reply)
            .ok_or_else(|| Error::Provider(format!("entity reply is not a JSON string array: {reply:?}")))?;
        let entities: BTreeSet<_> = names.iter().filter_map(|n| normalize_entity(n).ok()).collect();
        Ok(Extraction {
            entities,
            exchange: Exchange { messages, reply },
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
        let messages = prompts::decomposition_messages(query);
        let reply = self.complete(&messages)?;
        let mut subs: Vec<String> = prompts::parse_string_array(&reply)
            .ok_or_else(|| Error::Provider(format!("decomposition reply is not a JSON string array: {reply:?}")))?
            .into_iter()
            .map(|s| s.trim().to_owned())
            .filter(|s| !s.is_empty())
            .collect();
        if subs.is_empty() {
            subs.push(query.to_owned());
        }
        Ok(Decomposition {
            sub_queries: subs,
            exchange: Some(Exchange { messages, reply }),
        })
    }
}
