//! Auditing C protocol implementations against the mandatory requirements
//! of their RFCs.
//!
//! The pipeline has three stages that can run independently:
//!
//! 1. [`index`] summarizes the repository bottom-up (function, file,
//!    directory, repository) into a persisted, incrementally updatable tree.
//! 2. [`rfc`] segments a plain-text RFC into numbered sections and extracts
//!    mandatory requirements from each leaf section.
//! 3. [`agent`] checks every requirement with a localize / detect /
//!    retrieve / validate state machine, and [`report`] groups the findings.
//!
//! All model calls go through [`llm::LlmClient`], which can replay recorded
//! cassettes for fully deterministic runs.

pub mod agent;
pub mod code;
pub mod error;
mod fsutil;
pub mod index;
pub mod llm;
mod par;
pub mod prompts;
pub mod report;
pub mod rfc;

pub use error::{AgentError, CodeError, IndexError, LlmError, ReportError, RfcError};
pub use fsutil::write_atomic;
