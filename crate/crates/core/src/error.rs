use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("no source files matched; nothing to model")]
    EmptyModel,
    #[error("cannot read repository root {path}: {source}")]
    Root {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid glob {0}")]
    Glob(String),
    #[error("unknown function id {0}")]
    UnknownFunction(String),
    #[error("unknown call site #{0}")]
    UnknownCallSite(usize),
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("replay mismatch at record {position} ({purpose}): cassette has {expected}, request is {actual}")]
    Determinism {
        position: usize,
        expected: String,
        actual: String,
        purpose: String,
    },
    #[error("cassette exhausted at record {position} (request {actual})")]
    CassetteExhausted { position: usize, actual: String },
    #[error("cassette: {0}")]
    Cassette(String),
    #[error("mock backend: {0}")]
    Mock(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
}

impl LlmError {
    /// Failures worth retrying with backoff.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Http { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("index was built for {index:?} but the model is {model:?}")]
    RootMismatch { index: String, model: String },
    #[error("index schema version {found} is not supported (expected {expected}); rebuild it with `rfc-audit index --rebuild`")]
    Version { found: u32, expected: u32 },
    #[error("index parse error: {0}")]
    Parse(String),
    #[error("index is inconsistent: {0}")]
    Integrity(String),
    #[error("index i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum RfcError {
    #[error("properties file parse error: {0}")]
    Parse(String),
    #[error("properties file version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("properties i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("audit setup: {0}")]
    Setup(String),
    #[error("run file: {0}")]
    RunFile(String),
    #[error("i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("triage file: {0}")]
    Triage(String),
}
