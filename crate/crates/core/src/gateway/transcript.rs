use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::envelope::PromptEnvelope;
use super::StructuredResponse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionOutcome {
    Response(StructuredResponse),
    Error {
        message: String,
        raw_attempts: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptEntry {
    Completion {
        provider: String,
        envelope: PromptEnvelope,
        outcome: CompletionOutcome,
        wall_ms: u64,
        token_estimate: u64,
    },
    Embedding {
        provider: String,
        texts: usize,
        error: Option<String>,
        wall_ms: u64,
        token_estimate: u64,
    },
}

impl TranscriptEntry {
    pub fn token_estimate(&self) -> u64 {
        match self {
            TranscriptEntry::Completion { token_estimate, .. }
            | TranscriptEntry::Embedding { token_estimate, .. } => *token_estimate,
        }
    }

    pub fn wall_ms(&self) -> u64 {
        match self {
            TranscriptEntry::Completion { wall_ms, .. }
            | TranscriptEntry::Embedding { wall_ms, .. } => *wall_ms,
        }
    }

    pub fn envelope(&self) -> Option<&PromptEnvelope> {
        match self {
            TranscriptEntry::Completion { envelope, .. } => Some(envelope),
            TranscriptEntry::Embedding { .. } => None,
        }
    }
}

/// Append-only log of every gateway call.
#[derive(Debug, Default)]
pub struct Transcript {
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, entry: TranscriptEntry) {
        self.entries.lock().expect("transcript lock").push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("transcript lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("transcript lock").clone()
    }

    /// Entries appended at or after position `mark`.
    pub fn since(&self, mark: usize) -> Vec<TranscriptEntry> {
        let entries = self.entries.lock().expect("transcript lock");
        entries.get(mark..).map(<[_]>::to_vec).unwrap_or_default()
    }
}
