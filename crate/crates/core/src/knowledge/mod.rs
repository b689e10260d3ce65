//! Prior and experiment knowledge bases: two-level ingestion, an exact
//! cosine index, goal-aware retrieval with post-ranking, and snapshots.

mod manifest;
mod rank;
mod snapshot;
mod store;
mod types;

use thiserror::Error;

use crate::gateway::{GatewayError, TranscriptEntry};

pub use manifest::{load_documents, parse_manifest, read_manifest, ManifestEntry};
pub use rank::{post_rank, top_per_type};
pub use snapshot::{LoadError, SNAPSHOT_HEADER};
pub use store::{facet_item_id, KnowledgeStore, MAX_FACET_CHARS};
pub use types::{
    CoarseSummary, FacetType, KnowledgeItem, RankedEntry, RankedKnowledge, ResourceType,
    RetrievalQuery, Scope, SourceDocument, Stage, WeightTable,
};

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("document `{doc_id}` is already in the store")]
    Duplicate { doc_id: String },
    #[error("ingesting `{doc_id}` failed: {message}")]
    Ingest {
        doc_id: String,
        message: String,
        transcript: Vec<TranscriptEntry>,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("report failed validation: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("embedding dimension {found} does not match the store's {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}
