use std::sync::Arc;

use serde_json::{json, Value};

use super::{Embedder, EmbedderConfig, Vector};
use crate::error::{Error, Result};
use crate::http::HttpClient;

/// Embeddings-API backed embedder; vectors are returned verbatim.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    model: String,
    batch_size: usize,
    id: String,
    client: Arc<HttpClient>,
}

impl RemoteEmbedder {
    pub fn new(model: &str, batch_size: usize, client: Arc<HttpClient>) -> Self {
        RemoteEmbedder {
            model: model.to_owned(),
            batch_size: batch_size.max(1),
            id: EmbedderConfig::Remote {
                model: model.to_owned(),
                batch_size,
            }
            .embedder_id(),
            client,
        }
    }

    fn request(&self, batch: &[&str]) -> Result<Vec<Vector>> {
        let resp = self
            .client
            .post_json("embeddings", &json!({"model": self.model, "input": batch}))?;
        let data = resp
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Provider("embeddings response has no data array".into()))?;
        if data.len() != batch.len() {
            return Err(Error::Provider(format!(
                "embeddings response has {} items for {} inputs",
                data.len(),
                batch.len()
            )));
        }
        let mut rows: Vec<(usize, Vector)> = Vec::with_capacity(data.len());
        for (pos, item) in data.iter().enumerate() {
            let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
            let values: Vec<f64> = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Provider("embeddings item has no embedding".into()))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| Error::Provider("non-numeric embedding value".into())))
                .collect::<Result<_>>()?;
            rows.push((index, Vector::new(values)?));
        }
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> Option<usize> {
        None
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vector>> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            out.extend(self.request(batch)?);
        }
        if let Some(first) = out.first() {
            let dim = first.dim();
            if let Some(bad) = out.iter().find(|v| v.dim() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: bad.dim(),
                });
            }
        }
        Ok(out)
    }
}
