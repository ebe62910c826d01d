use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),

    #[error("line {line}: pre-chunked and unsegmented records cannot be mixed in one corpus")]
    MixedRecordForms { line: usize },

    #[error("document {doc_id:?}: positions must be contiguous from 0, found gap at {position}")]
    NonContiguousPositions { doc_id: String, position: usize },

    #[error("unknown tokenizer {0:?}")]
    UnknownTokenizer(String),

    #[error("entity text is empty after trimming")]
    EmptyEntity,

    #[error("query is empty")]
    EmptyQuery,

    #[error("no sub-queries to weight entities against")]
    EmptySubQueries,

    #[error("vector dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("vector contains a non-finite value")]
    NonFiniteVector,

    #[error("embedder {actual:?} does not match the index embedder {expected:?}")]
    EmbedderMismatch { expected: String, actual: String },

    #[error("provider error: {0}")]
    Provider(String),

    #[error("environment variable {0} is not set (required for remote providers)")]
    MissingEnv(&'static str),

    #[error("remote providers are not compiled in (enable the `remote` feature)")]
    RemoteUnavailable,

    #[error("unsupported index schema {found:?} (expected {expected:?})")]
    UnsupportedSchema { found: String, expected: &'static str },

    #[error("index file is corrupt: {0}")]
    Corrupt(String),

    #[error("chunk {0:?} is already indexed")]
    DuplicateChunk(String),

    #[error("config fingerprint mismatch: index has {expected}, providers give {actual}; pass the provider options the index was built with")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("gold set is empty; recall is undefined")]
    EmptyGold,

    #[error("no examples to evaluate")]
    NoExamples,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
