//! Hashed character n-gram embedder.
//!
//! Reference procedure (also in `tests/oracles/local_embedding.py`):
//!
//! 1. NFC-normalize, lowercase, collapse whitespace runs to one space, and
//!    pad with one space on each side.
//! 2. Take every window of `n` Unicode scalar values for `n` in 2..=4.
//! 3. Hash each window with FNV-1a 64 over the seed's 8 little-endian bytes
//!    followed by the window's UTF-8 bytes.
//! 4. Add 1.0 to bucket `hash mod d`.
//! 5. Divide by the L2 norm.

use unicode_normalization::UnicodeNormalization;

use super::{Embedder, EmbedderConfig, Vector};
use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 256;
/// ASCII "SLIMRAG!" read as a big-endian integer.
pub const DEFAULT_SEED: u64 = 0x534C_494D_5241_4721;

const NGRAM_MIN: usize = 2;
const NGRAM_MAX: usize = 4;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone)]
pub struct LocalEmbedder {
    dim: usize,
    seed: u64,
    id: String,
}

impl LocalEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("embedding dimension must be positive".into()));
        }
        Ok(LocalEmbedder {
            dim,
            seed,
            id: EmbedderConfig::Local { dim, seed }.embedder_id(),
        })
    }

    pub fn config(&self) -> EmbedderConfig {
        EmbedderConfig::Local {
            dim: self.dim,
            seed: self.seed,
        }
    }

    fn embed_one(&self, text: &str) -> Result<Vector> {
        let normalized: String = text.nfc().collect::<String>().to_lowercase();
        let collapsed = normalized.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() {
            return Err(Error::InvalidParam("cannot embed empty text".into()));
        }
        let chars: Vec<char> = std::iter::once(' ')
            .chain(collapsed.chars())
            .chain(std::iter::once(' '))
            .collect();
        let prefix = {
            let mut h = FNV_OFFSET;
            for b in self.seed.to_le_bytes() {
                h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
            }
            h
        };
        let mut values = vec![0.0f64; self.dim];
        let mut buf = [0u8; 4];
        for n in NGRAM_MIN..=NGRAM_MAX {
            for window in chars.windows(n) {
                let mut h = prefix;
                for ch in window {
                    for &b in ch.encode_utf8(&mut buf).as_bytes() {
                        h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
                    }
                }
                values[(h % self.dim as u64) as usize] += 1.0;
            }
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        values.iter_mut().for_each(|v| *v /= norm);
        Vector::new(values)
    }
}

impl Default for LocalEmbedder {
    fn default() -> Self {
        LocalEmbedder::new(DEFAULT_DIM, DEFAULT_SEED).expect("default dimension is positive")
    }
}

impl Embedder for LocalEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vector>> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}
