use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendKind, ChatRequest, ChatResponse, TokenUsage};
use crate::error::LlmError;

pub const CASSETTE_VERSION: u32 = 1;
const CASSETTE_FORMAT: &str = "rfc-audit-cassette";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub request_hash: String,
    pub request: ChatRequest,
    pub response: String,
    pub usage: TokenUsage,
    #[serde(default)]
    pub latency_ms: u64,
}

/// Ordered recording of request/response pairs. Only request bodies are
/// stored; transport headers (and therefore credentials) never are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub format: String,
    pub version: u32,
    pub records: Vec<CassetteRecord>,
}

impl Default for Cassette {
    fn default() -> Self {
        Cassette {
            format: CASSETTE_FORMAT.into(),
            version: CASSETTE_VERSION,
            records: Vec::new(),
        }
    }
}

impl Cassette {
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, LlmError> {
        let c: Cassette = serde_json::from_slice(bytes).map_err(|e| LlmError::Cassette(format!("parse error: {e}")))?;
        if c.format != CASSETTE_FORMAT {
            return Err(LlmError::Cassette(format!("unexpected format tag {:?}", c.format)));
        }
        if c.version != CASSETTE_VERSION {
            return Err(LlmError::Cassette(format!(
                "cassette version {} is not supported (expected {CASSETTE_VERSION}); re-record it",
                c.version
            )));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let bytes = std::fs::read(path).map_err(|e| LlmError::Cassette(format!("{}: {e}", path.display())))?;
        Self::from_json_bytes(&bytes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cassette serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        crate::fsutil::write_atomic(path, self.to_json().as_bytes())
            .map_err(|e| LlmError::Cassette(format!("{}: {e}", path.display())))
    }
}

/// Serves the next record in order; the request hash must match exactly.
///
/// Order is tracked per stream: a request is matched against the next
/// unconsumed record of its own stream. A run that stops a conversation
/// early (an ablation) therefore leaves that stream's tail unconsumed
/// instead of desynchronizing every later request.
pub struct ReplayBackend {
    cassette: Cassette,
    cursors: Mutex<HashMap<Option<String>, usize>>,
}

impl ReplayBackend {
    pub fn new(cassette: Cassette) -> Self {
        ReplayBackend {
            cassette,
            cursors: Mutex::new(HashMap::new()),
        }
    }

    /// Records not yet served.
    pub fn remaining(&self) -> usize {
        let cursors = self.cursors.lock().expect("cursor poisoned");
        self.cassette
            .records
            .iter()
            .enumerate()
            .filter(|(i, r)| cursors.get(&r.request.stream).is_none_or(|c| i >= c))
            .count()
    }
}

impl Backend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn requires_sequential(&self) -> bool {
        true
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut cursors = self.cursors.lock().expect("cursor poisoned");
        let actual = request.request_hash();
        let cursor = cursors.entry(request.stream.clone()).or_insert(0);
        let next = self.cassette.records[*cursor..]
            .iter()
            .position(|r| r.request.stream == request.stream)
            .map(|p| p + *cursor);
        let Some(position) = next else {
            return Err(LlmError::CassetteExhausted {
                position: self.cassette.records.len(),
                actual,
            });
        };
        let record = &self.cassette.records[position];
        if record.request_hash != actual {
            return Err(LlmError::Determinism {
                position,
                expected: record.request_hash.clone(),
                actual,
                purpose: request.purpose.clone(),
            });
        }
        *cursor = position + 1;
        Ok(ChatResponse {
            content: record.response.clone(),
            usage: record.usage,
            latency_ms: record.latency_ms,
        })
    }
}

/// Forwards to an inner backend and appends every exchange to a cassette
/// written on `finish`.
pub struct RecordBackend {
    inner: Box<dyn Backend>,
    path: PathBuf,
    cassette: Mutex<Cassette>,
}

impl RecordBackend {
    pub fn new(inner: Box<dyn Backend>, path: impl Into<PathBuf>) -> Self {
        RecordBackend {
            inner,
            path: path.into(),
            cassette: Mutex::new(Cassette::default()),
        }
    }

    pub fn snapshot(&self) -> Cassette {
        self.cassette.lock().expect("cassette poisoned").clone()
    }
}

impl Backend for RecordBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Record
    }

    fn requires_sequential(&self) -> bool {
        true
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let started = Instant::now();
        let mut response = self.inner.complete(request)?;
        if self.inner.kind() == BackendKind::Live && response.latency_ms == 0 {
            response.latency_ms = started.elapsed().as_millis() as u64;
        }
        self.cassette
            .lock()
            .expect("cassette poisoned")
            .records
            .push(CassetteRecord {
                request_hash: request.request_hash(),
                request: request.clone(),
                response: response.content.clone(),
                usage: response.usage,
                latency_ms: response.latency_ms,
            });
        Ok(response)
    }

    fn finish(&self) -> Result<(), LlmError> {
        self.snapshot().save(&self.path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockRule, MockScript, ScriptedBackend};

    fn mock() -> ScriptedBackend {
        ScriptedBackend::new(MockScript {
            rules: vec![MockRule::any("canned")],
        })
    }

    #[test]
    fn record_then_replay_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let rec = RecordBackend::new(Box::new(mock()), &path);
        let a = ChatRequest::new("p", "m", "s", "one");
        let b = ChatRequest::new("p", "m", "s", "two");
        rec.complete(&a).unwrap();
        rec.complete(&b).unwrap();
        rec.finish().unwrap();

        let replay = ReplayBackend::new(Cassette::load(&path).unwrap());
        assert_eq!(replay.complete(&a).unwrap().content, "canned");
        assert_eq!(replay.complete(&b).unwrap().content, "canned");
        assert!(matches!(
            replay.complete(&a),
            Err(LlmError::CassetteExhausted { position: 2, .. })
        ));
    }

    #[test]
    fn out_of_order_request_names_both_hashes() {
        let a = ChatRequest::new("p", "m", "s", "one");
        let b = ChatRequest::new("p", "m", "s", "two");
        let cassette = Cassette {
            records: vec![CassetteRecord {
                request_hash: a.request_hash(),
                request: a.clone(),
                response: "x".into(),
                usage: TokenUsage::default(),
                latency_ms: 0,
            }],
            ..Default::default()
        };
        let replay = ReplayBackend::new(cassette);
        match replay.complete(&b) {
            Err(LlmError::Determinism { expected, actual, .. }) => {
                assert_eq!(expected, a.request_hash());
                assert_eq!(actual, b.request_hash());
            }
            other => panic!("expected determinism error, got {other:?}"),
        }
        assert_eq!(replay.remaining(), 1);
    }

    #[test]
    fn version_and_format_are_checked() {
        let c = Cassette {
            version: 99,
            ..Cassette::default()
        };
        assert!(Cassette::from_json_bytes(c.to_json().as_bytes()).is_err());
        assert!(Cassette::from_json_bytes(b"{\"format\":").is_err());
        assert!(Cassette::from_json_bytes(Cassette::default().to_json().as_bytes()).is_ok());
    }
}
