//! Chat-completion client with live, record, replay and scripted backends.
//!
//! Every request is built at temperature 0.0; there is no setter. Usage is
//! metered into a synchronized ledger and priced with configurable
//! per-million-token rates.

mod cassette;
mod live;
mod mock;

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use cassette::{Cassette, CassetteRecord, RecordBackend, ReplayBackend, CASSETTE_VERSION};
pub use live::{LiveBackend, LiveConfig, API_KEY_ENV, API_KEY_ENV_FALLBACK};
pub use mock::{MockRule, MockScript, ScriptedBackend};

use crate::error::LlmError;

/// Greedy decoding for every request.
pub const TEMPERATURE: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    /// Pipeline step that issued the request (e.g. `index.function`).
    pub purpose: String,
    pub model_tag: String,
    pub system: String,
    pub messages: Vec<Message>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tools: Vec<ToolSpec>,
    temperature: f64,
    pub max_output_tokens: u32,
    /// Independent conversation the request belongs to (one per audited
    /// property). Replay keeps a separate cursor per stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<String>,
}

impl ChatRequest {
    pub fn new(
        purpose: impl Into<String>,
        model_tag: impl Into<String>,
        system: impl Into<String>,
        user: impl Into<String>,
    ) -> Self {
        ChatRequest {
            purpose: purpose.into(),
            model_tag: model_tag.into(),
            system: system.into(),
            messages: vec![Message::user(user)],
            tools: Vec::new(),
            temperature: TEMPERATURE,
            max_output_tokens: 2048,
            stream: None,
        }
    }

    pub fn with_stream(mut self, stream: impl Into<String>) -> Self {
        self.stream = Some(stream.into());
        self
    }

    pub fn with_tools(mut self, tools: Vec<ToolSpec>) -> Self {
        self.tools = tools;
        self
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n;
        self
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// All prompt text, for inspection in tests and transcripts.
    pub fn prompt_text(&self) -> String {
        let mut s = self.system.clone();
        for m in &self.messages {
            s.push('\n');
            s.push_str(&m.content);
        }
        s
    }

    /// SHA-256 over the key-order-independent canonical JSON form.
    pub fn request_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("request serializes");
        hex::encode(Sha256::digest(canonical_json(&value).as_bytes()))
    }
}

/// Serializes a JSON value with object keys sorted at every level.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub usage: TokenUsage,
    /// Backend-reported latency. Replay returns the recorded value so
    /// metered time is reproducible.
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Record,
    Replay,
    Mock,
}

pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
    /// Backends whose answers depend on call order force sequential callers.
    fn requires_sequential(&self) -> bool {
        false
    }
    /// Flushes any state (e.g. a cassette being recorded).
    fn finish(&self) -> Result<(), LlmError> {
        Ok(())
    }
}

/// Rough token estimate used where no tokenizer is available.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// USD per million input tokens.
    pub input_per_million: f64,
    /// USD per million output tokens.
    pub output_per_million: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Rates {
            input_per_million: 3.0,
            output_per_million: 15.0,
        }
    }
}

impl Rates {
    pub fn cost(&self, input_tokens: u64, output_tokens: u64) -> f64 {
        (input_tokens as f64 * self.input_per_million + output_tokens as f64 * self.output_per_million) / 1_000_000.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub seq: u64,
    pub purpose: String,
    pub model_tag: String,
    pub request_hash: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageStats {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub call_count: u64,
    pub wall_time_ms: u64,
    pub cost_usd: f64,
}

impl UsageStats {
    /// Aggregates ledger entries and prices them.
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = &'a LedgerEntry>, rates: &Rates) -> Self {
        let mut s = UsageStats::default();
        for e in entries {
            s.input_tokens += e.input_tokens;
            s.output_tokens += e.output_tokens;
            s.call_count += 1;
            s.wall_time_ms += e.latency_ms;
        }
        s.cost_usd = rates.cost(s.input_tokens, s.output_tokens);
        s
    }

    pub fn add_call(&mut self, usage: TokenUsage, latency_ms: u64, rates: &Rates) {
        self.input_tokens += usage.input_tokens;
        self.output_tokens += usage.output_tokens;
        self.call_count += 1;
        self.wall_time_ms += latency_ms;
        self.cost_usd = rates.cost(self.input_tokens, self.output_tokens);
    }

    pub fn merged(&self, other: &UsageStats, rates: &Rates) -> UsageStats {
        let input_tokens = self.input_tokens + other.input_tokens;
        let output_tokens = self.output_tokens + other.output_tokens;
        UsageStats {
            input_tokens,
            output_tokens,
            call_count: self.call_count + other.call_count,
            wall_time_ms: self.wall_time_ms + other.wall_time_ms,
            cost_usd: rates.cost(input_tokens, output_tokens),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Counting semaphore bounding in-flight calls.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut free = self.free.lock().expect("limiter poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("limiter poisoned");
        }
        *free -= 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("limiter poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// Shared client: one backend, one ledger, one global in-flight limit.
pub struct LlmClient {
    backend: Arc<dyn Backend>,
    ledger: Mutex<Vec<LedgerEntry>>,
    limiter: Limiter,
    parallelism: usize,
    retry: RetryPolicy,
    rates: Rates,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("backend", &self.backend.kind())
            .field("parallelism", &self.parallelism)
            .finish()
    }
}

impl LlmClient {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        LlmClient {
            backend,
            ledger: Mutex::new(Vec::new()),
            limiter: Limiter::new(4),
            parallelism: 4,
            retry: RetryPolicy::default(),
            rates: Rates::default(),
        }
    }

    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.parallelism = n.max(1);
        self.limiter = Limiter::new(self.parallelism);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rates(mut self, rates: Rates) -> Self {
        self.rates = rates;
        self
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    /// Worker count callers should use. Order-sensitive backends get one.
    pub fn effective_parallelism(&self) -> usize {
        if self.backend.requires_sequential() {
            1
        } else {
            self.parallelism
        }
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        debug_assert_eq!(request.temperature(), TEMPERATURE);
        let _permit = self.limiter.acquire();
        let mut attempt = 0;
        let response = loop {
            match self.backend.complete(request) {
                Ok(r) => break r,
                Err(e) if e.is_transient() && attempt < self.retry.max_retries => {
                    let delay = self.retry.base_delay * 2u32.pow(attempt);
                    tracing::warn!(attempt, ?delay, error = %e, "transient LLM failure, retrying");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) if e.is_transient() => {
                    return Err(LlmError::RetriesExhausted {
                        attempts: attempt + 1,
                        last: e.to_string(),
                    })
                }
                Err(e) => return Err(e),
            }
        };
        let mut ledger = self.ledger.lock().expect("ledger poisoned");
        let seq = ledger.len() as u64;
        ledger.push(LedgerEntry {
            seq,
            purpose: request.purpose.clone(),
            model_tag: request.model_tag.clone(),
            request_hash: request.request_hash(),
            input_tokens: response.usage.input_tokens,
            output_tokens: response.usage.output_tokens,
            latency_ms: response.latency_ms,
        });
        Ok(response)
    }

    pub fn ledger(&self) -> Vec<LedgerEntry> {
        self.ledger.lock().expect("ledger poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.ledger.lock().expect("ledger poisoned").len()
    }

    /// Aggregated usage over the whole ledger.
    pub fn meter(&self) -> UsageStats {
        let ledger = self.ledger.lock().expect("ledger poisoned");
        UsageStats::from_entries(ledger.iter(), &self.rates)
    }

    /// Usage of ledger entries from `mark` (a previous `call_count`) on.
    pub fn meter_since(&self, mark: usize) -> UsageStats {
        let ledger = self.ledger.lock().expect("ledger poisoned");
        UsageStats::from_entries(ledger.iter().skip(mark), &self.rates)
    }

    pub fn finish(&self) -> Result<(), LlmError> {
        self.backend.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn request_hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"b":1,"a":{"y":[1,{"q":2,"p":3}],"x":null}}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a":{"x":null,"y":[1,{"p":3,"q":2}]},"b":1}"#).unwrap();
        assert_eq!(canonical_json(&a), canonical_json(&b));
        let r1 = ChatRequest::new("p", "m", "sys", "hello");
        let r2 = ChatRequest::new("p", "m", "sys", "hello");
        assert_eq!(r1.request_hash(), r2.request_hash());
        assert_ne!(
            r1.request_hash(),
            ChatRequest::new("p", "m", "sys", "hello!").request_hash()
        );
        assert_eq!(r1.temperature(), 0.0);
    }

    #[test]
    fn meter_is_additive() {
        let rates = Rates::default();
        let entries = [
            LedgerEntry {
                seq: 0,
                purpose: "a".into(),
                model_tag: "m".into(),
                request_hash: "h".into(),
                input_tokens: 100,
                output_tokens: 10,
                latency_ms: 5,
            },
            LedgerEntry {
                seq: 1,
                purpose: "b".into(),
                model_tag: "m".into(),
                request_hash: "h".into(),
                input_tokens: 200,
                output_tokens: 20,
                latency_ms: 7,
            },
        ];
        let s = UsageStats::from_entries(entries.iter(), &rates);
        assert_eq!(
            (s.input_tokens, s.output_tokens, s.call_count, s.wall_time_ms),
            (300, 30, 2, 12)
        );
        assert!((s.cost_usd - (300.0 * 3.0 + 30.0 * 15.0) / 1e6).abs() < 1e-12);
    }

    struct Flaky {
        failures: AtomicUsize,
    }

    impl Backend for Flaky {
        fn kind(&self) -> BackendKind {
            BackendKind::Live
        }

        fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, LlmError> {
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                return Err(LlmError::Http {
                    status: 529,
                    body: "overloaded".into(),
                });
            }
            Ok(ChatResponse {
                content: "ok".into(),
                usage: TokenUsage::default(),
                latency_ms: 0,
            })
        }
    }

    #[test]
    fn transient_failures_are_retried_then_exhausted() {
        let retry = RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(1),
        };
        let req = ChatRequest::new("p", "m", "s", "u");
        let ok = LlmClient::new(Arc::new(Flaky {
            failures: AtomicUsize::new(3),
        }))
        .with_retry(retry);
        assert_eq!(ok.complete(&req).unwrap().content, "ok");
        assert_eq!(ok.call_count(), 1);
        let bad = LlmClient::new(Arc::new(Flaky {
            failures: AtomicUsize::new(4),
        }))
        .with_retry(retry);
        assert!(matches!(
            bad.complete(&req),
            Err(LlmError::RetriesExhausted { attempts: 4, .. })
        ));
        assert_eq!(bad.call_count(), 0);
    }
}
