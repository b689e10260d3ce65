//! Corpus manifests: one JSON object per line naming a UTF-8 text file
//! (relative to the manifest) and its document metadata.
//!
//! ```text
//! {"file": "gcn.txt", "doc_id": "kipf2017", "resource_type": "paper", "title": "GCN", "origin": "arxiv:1609.02907"}
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::types::{ResourceType, SourceDocument};
use super::KnowledgeError;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: PathBuf,
    pub doc_id: String,
    pub resource_type: ResourceType,
    pub title: String,
    #[serde(default)]
    pub origin: String,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, KnowledgeError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| KnowledgeError::Io(format!("{}: {e}", path.display())))?;
    parse_manifest(&text)
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, KnowledgeError> {
    let mut entries: Vec<ManifestEntry> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| KnowledgeError::Manifest {
                line: i + 1,
                message: e.to_string(),
            })?;
        if entries.iter().any(|e| e.doc_id == entry.doc_id) {
            return Err(KnowledgeError::Manifest {
                line: i + 1,
                message: format!("doc_id `{}` listed twice", entry.doc_id),
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Reads every document a manifest lists, resolving files against `base_dir`.
pub fn load_documents(
    entries: &[ManifestEntry],
    base_dir: &Path,
) -> Result<Vec<SourceDocument>, KnowledgeError> {
    entries
        .iter()
        .map(|entry| {
            let path = base_dir.join(&entry.file);
            let body = std::fs::read_to_string(&path)
                .map_err(|e| KnowledgeError::Io(format!("{}: {e}", path.display())))?;
            Ok(SourceDocument {
                doc_id: entry.doc_id.clone(),
                resource_type: entry.resource_type,
                title: entry.title.clone(),
                body,
                origin: entry.origin.clone(),
            })
        })
        .collect()
}
