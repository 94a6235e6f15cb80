use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IndexNode, SemanticIndex};
use crate::error::IndexError;
use crate::llm::UsageStats;

pub const INDEX_VERSION: u32 = 1;
const INDEX_FORMAT: &str = "rfc-audit-index";

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    root: String,
    root_label: String,
    created_at: u64,
    updated_at: u64,
    nodes: Vec<IndexNode>,
    usage: UsageStats,
}

#[derive(Deserialize)]
struct Header {
    format: Option<String>,
    version: Option<u32>,
}

impl SemanticIndex {
    pub fn to_json(&self) -> String {
        let file = IndexFile {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            root: self.root.clone(),
            root_label: self.root_label.clone(),
            created_at: self.created_at,
            updated_at: self.updated_at,
            nodes: self.nodes.values().cloned().collect(),
            usage: self.usage,
        };
        serde_json::to_string_pretty(&file).expect("index serializes") + "\n"
    }

    /// Decodes and validates an index document. Nothing is returned unless
    /// the whole document is well-formed and structurally consistent.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let header: Header = serde_json::from_slice(bytes).map_err(|e| IndexError::Parse(e.to_string()))?;
        if header.format.as_deref() != Some(INDEX_FORMAT) {
            return Err(IndexError::Parse(format!(
                "not an index file (format tag {:?})",
                header.format
            )));
        }
        match header.version {
            Some(INDEX_VERSION) => {}
            Some(found) => {
                return Err(IndexError::Version {
                    found,
                    expected: INDEX_VERSION,
                })
            }
            None => return Err(IndexError::Parse("missing version".into())),
        }
        let file: IndexFile = serde_json::from_slice(bytes).map_err(|e| IndexError::Parse(e.to_string()))?;
        let mut nodes = BTreeMap::new();
        for node in file.nodes {
            let id = node.node_id.clone();
            if nodes.insert(id.clone(), node).is_some() {
                return Err(IndexError::Integrity(format!("duplicate node {id}")));
            }
        }
        let index = SemanticIndex {
            root: file.root,
            root_label: file.root_label,
            created_at: file.created_at,
            updated_at: file.updated_at,
            nodes,
            usage: file.usage,
        };
        index.check_integrity()?;
        Ok(index)
    }
}

/// Writes the index atomically (temp file + rename).
pub fn persist_index(index: &SemanticIndex, path: &Path) -> Result<(), IndexError> {
    crate::fsutil::write_atomic(path, index.to_json().as_bytes()).map_err(|e| IndexError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_index(path: &Path) -> Result<SemanticIndex, IndexError> {
    let bytes = std::fs::read(path).map_err(|e| IndexError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    SemanticIndex::from_json_bytes(&bytes)
}
