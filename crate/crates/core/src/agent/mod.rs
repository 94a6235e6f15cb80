//! Detection agent: a per-property state machine that localizes relevant
//! functions through the semantic index, asks the model for a decision,
//! retrieves more code on demand and has candidate violations re-reviewed.

mod audit;
mod context;
mod fsm;
mod localize;
pub mod protocol;
mod tools;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::prompts::PromptSet;

pub use audit::{
    load_run, run_audit, transcript_file_name, write_run_dir, AuditRun, PropertyRecord, RunConfig, RunUsage,
    RUN_FORMAT, RUN_VERSION,
};
pub use context::{AgentContext, GatheredItem, Provenance, TranscriptEvent};
pub use fsm::{run_property, Implicated, PropertyOutcome, PropertyStatus, Verdict, VerdictDecision};
pub use localize::{localize, NavNode, NavTree};
pub use protocol::{Citation, ToolInvocation, ToolKind};
pub use tools::{execute_tool, ToolObservation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectionState {
    Localization,
    Detection,
    Retrieval,
    Validation,
    ConcludedConformant,
    ConcludedViolation,
    ConcludedInconclusive,
}

impl DetectionState {
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            DetectionState::ConcludedConformant
                | DetectionState::ConcludedViolation
                | DetectionState::ConcludedInconclusive
        )
    }
}

/// The transition relation. `Detection -> ConcludedViolation` exists only
/// when validation is switched off.
pub fn is_legal_transition(from: DetectionState, to: DetectionState, validation_enabled: bool) -> bool {
    use DetectionState::*;
    match (from, to) {
        (f, ConcludedInconclusive) => !f.is_terminal(),
        (Localization, Detection)
        | (Detection, Validation | ConcludedConformant | Retrieval)
        | (Retrieval, Detection)
        | (Validation, ConcludedViolation | ConcludedConformant) => true,
        (Detection, ConcludedViolation) => !validation_enabled,
        _ => false,
    }
}

/// A complete trace starts at localization, follows legal transitions and
/// ends in exactly one terminal state.
pub fn is_legal_trace(trace: &[DetectionState], validation_enabled: bool) -> bool {
    let (Some(first), Some(last)) = (trace.first(), trace.last()) else {
        return false;
    };
    *first == DetectionState::Localization
        && last.is_terminal()
        && trace[..trace.len() - 1].iter().all(|s| !s.is_terminal())
        && trace
            .windows(2)
            .all(|w| is_legal_transition(w[0], w[1], validation_enabled))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fanout {
    pub directories: usize,
    pub files: usize,
    pub functions: usize,
}

impl Default for Fanout {
    fn default() -> Self {
        Fanout {
            directories: 4,
            files: 6,
            functions: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Localize from names and signatures only; index summaries are unused.
    pub no_semantic_index: bool,
    /// Treat every request for more context as inconclusive.
    pub no_retrieval: bool,
    /// Accept bug candidates without the self-critique review.
    pub no_validation: bool,
    pub disabled_tools: BTreeSet<ToolKind>,
}

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub model_tag: String,
    pub max_retrieval: usize,
    pub max_gathered: usize,
    /// Input plus output tokens one property may spend.
    pub token_budget: u64,
    /// Estimated tokens of gathered code shown in one prompt before the
    /// oldest retrieved items are elided.
    pub context_token_budget: u64,
    pub fanout: Fanout,
    pub ablation: Ablation,
    pub max_output_tokens: u32,
    pub prompts: PromptSet,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            model_tag: "claude-3-5-sonnet-20241022".into(),
            max_retrieval: 6,
            max_gathered: 25,
            token_budget: 400_000,
            context_token_budget: 60_000,
            fanout: Fanout::default(),
            ablation: Ablation::default(),
            max_output_tokens: 2048,
            prompts: PromptSet::default(),
        }
    }
}

impl AgentConfig {
    pub fn enabled_tools(&self) -> Vec<ToolKind> {
        [ToolKind::Query, ToolKind::QueryCallee, ToolKind::QueryCaller]
            .into_iter()
            .filter(|k| !self.ablation.disabled_tools.contains(k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::DetectionState::*;
    use super::*;

    #[test]
    fn transition_relation() {
        assert!(is_legal_trace(&[Localization, Detection, ConcludedConformant], true));
        assert!(is_legal_trace(
            &[
                Localization,
                Detection,
                Retrieval,
                Detection,
                Validation,
                ConcludedViolation
            ],
            true
        ));
        assert!(is_legal_trace(&[Localization, ConcludedInconclusive], true));
        assert!(!is_legal_trace(&[Localization, Detection, ConcludedViolation], true));
        assert!(is_legal_trace(&[Localization, Detection, ConcludedViolation], false));
        assert!(!is_legal_trace(&[Localization, Validation, ConcludedViolation], true));
        assert!(!is_legal_trace(&[Localization, Detection], true));
        assert!(!is_legal_trace(&[Detection, ConcludedConformant], true));
        assert!(!is_legal_trace(&[], true));
    }
}
