//! Embedding cache keyed by (embedder id, text digest).
//!
//! The on-disk form is append-only JSONL, one
//! `{"embedder_id", "digest", "vector"}` record per line. A torn final line
//! (from an interrupted write) is ignored on load.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{Embedder, Vector};
use crate::canonical::sha256_hex;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Record {
    embedder_id: String,
    digest: String,
    vector: Vector,
}

type Key = (String, String);

#[derive(Debug, Default)]
pub struct EmbeddingCache {
    entries: RwLock<HashMap<Key, Vector>>,
    sink: Option<(PathBuf, Mutex<File>)>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        EmbeddingCache::default()
    }

    /// Load `path` if it exists and append new entries to it.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(path, e))?;
                match serde_json::from_str::<Record>(&line) {
                    Ok(r) => {
                        entries.insert((r.embedder_id, r.digest), r.vector);
                    }
                    Err(e) => log::warn!("{}: skipping unreadable cache record: {e}", path.display()),
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(EmbeddingCache {
            entries: RwLock::new(entries),
            sink: Some((path.to_owned(), Mutex::new(file))),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, embedder_id: &str, text: &str) -> Option<Vector> {
        let key = (embedder_id.to_owned(), sha256_hex(text.as_bytes()));
        self.entries
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(&key)
            .cloned()
    }

    pub fn put(&self, embedder_id: &str, text: &str, vector: Vector) -> Result<()> {
        let digest = sha256_hex(text.as_bytes());
        let key = (embedder_id.to_owned(), digest.clone());
        let mut entries = self.entries.write().unwrap_or_else(|p| p.into_inner());
        if entries.contains_key(&key) {
            return Ok(());
        }
        if let Some((path, file)) = &self.sink {
            let line = serde_json::to_string(&Record {
                embedder_id: embedder_id.to_owned(),
                digest,
                vector: vector.clone(),
            })?;
            let mut f = file.lock().unwrap_or_else(|p| p.into_inner());
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        entries.insert(key, vector);
        Ok(())
    }
}

/// An embedder that consults an [`EmbeddingCache`] before the inner one.
#[derive(Clone)]
pub struct CachedEmbedder {
    inner: Arc<dyn Embedder>,
    cache: Arc<EmbeddingCache>,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn Embedder>, cache: Arc<EmbeddingCache>) -> Self {
        CachedEmbedder { inner, cache }
    }
}

impl Embedder for CachedEmbedder {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn dimension(&self) -> Option<usize> {
        self.inner.dimension()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vector>> {
        let id = self.inner.id();
        let mut out: Vec<Option<Vector>> = texts.iter().map(|t| self.cache.get(id, t)).collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let fresh = self.inner.embed_batch(&batch)?;
            for (&i, v) in missing.iter().zip(fresh) {
                self.cache.put(id, texts[i], v.clone())?;
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }
}
