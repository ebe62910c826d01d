//! Graph-free, entity-aware retrieval.
//!
//! Chunks are indexed by the canonical entities they mention. A query is
//! decomposed, its entities are matched against the indexed entities by
//! embedding similarity, and the chunks those entities point to are scored
//! by query similarity times the number of matched entities they contain.
//!
//! ```
//! use slimrag::{build_index, retrieve, Corpus, LocalEmbedder, LocalExtractor, Pipeline,
//!               RetrievalParams, SegmentationPolicy, SentenceSplitter, Tokenizer};
//!
//! let corpus = Corpus::from_documents(
//!     [("curie", "Marie Curie was born in Warsaw. She moved to Paris in 1891.")],
//!     SegmentationPolicy::SentencePerChunk,
//!     &SentenceSplitter::default(),
//!     Tokenizer::default(),
//! )?;
//! let (extractor, embedder) = (LocalExtractor::default(), LocalEmbedder::default());
//! let pipeline = Pipeline::new(&extractor, &embedder);
//! let index = build_index(&corpus, &pipeline)?;
//! let context = retrieve(&index, "Where was Marie Curie born?", &RetrievalParams::default(), &pipeline)?;
//! assert!(context.text.contains("Warsaw"));
//! # Ok::<(), slimrag::Error>(())
//! ```

pub mod accounting;
pub mod canonical;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod exec;
pub mod extraction;
#[cfg(feature = "remote")]
pub mod http;
pub mod index;
pub mod metrics;
pub mod retrieval;
pub mod tokenizer;

pub use accounting::{Source, TokenAccounting, TokenLedger};
pub use corpus::{ingest_corpus, Chunk, Corpus, SegmentationPolicy, SentenceSplitter};
pub use embedding::{Embedder, EmbedderConfig, LocalEmbedder, Vector};
pub use error::{Error, Result};
pub use eval::{load_hotpotqa, run_eval, EvalExample, EvalReport, EvalScope};
pub use exec::Execution;
pub use extraction::{EntityExtractor, ExtractorConfig, LocalExtractor};
pub use index::{add_chunks, build_index, load_index, save_index, EntityIndex, Pipeline};
pub use metrics::{compute_ritu, score_retrieval, RetrievalScore, RituReport};
pub use retrieval::{retrieve, Context, RetrievalParams};
pub use tokenizer::Tokenizer;
