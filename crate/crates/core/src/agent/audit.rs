//! Batch driver over all properties and the run directory layout:
//! `run.json` plus one transcript per property under `transcripts/`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::context::{usage_of, GatheredItem, TranscriptEvent};
use super::fsm::{run_property, PropertyOutcome, PropertyStatus, Verdict, VerdictDecision};
use super::localize::NavTree;
use super::{Ablation, AgentConfig, DetectionState, Fanout};
use crate::code::CodebaseModel;
use crate::error::AgentError;
use crate::llm::{LlmClient, Rates, UsageStats};
use crate::report::{ImplicatedLocation, InconsistencyReport, Novelty, TriageStatus};
use crate::rfc::SemanticProperty;

pub const RUN_FORMAT: &str = "rfc-audit-run";
pub const RUN_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model_tag: String,
    /// `semantic-index` or `names-only`.
    pub navigation: String,
    pub max_retrieval: usize,
    pub max_gathered: usize,
    pub token_budget: u64,
    pub context_token_budget: u64,
    pub fanout: Fanout,
    pub ablation: Ablation,
    pub rates: Rates,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunUsage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indexing: Option<UsageStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<UsageStats>,
    pub detection: UsageStats,
    pub total: UsageStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    pub property_id: String,
    pub section_ref: String,
    pub status: PropertyStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub trace: Vec<DetectionState>,
    pub report_ids: Vec<String>,
    pub transcript: String,
    pub tool_executions: usize,
    pub unvalidated: usize,
    /// `entity id [provenance]` of every gathered item, in order.
    pub gathered: Vec<String>,
    pub usage: UsageStats,
}

/// Everything a run produced. Contains no timestamps or wall-clock data so
/// that replayed runs serialize byte-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRun {
    pub format: String,
    pub version: u32,
    pub rfc_id: String,
    pub repository: String,
    pub config: RunConfig,
    pub properties: Vec<PropertyRecord>,
    pub reports: Vec<InconsistencyReport>,
    pub usage: RunUsage,
    pub warnings: Vec<String>,
}

impl AuditRun {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run serializes") + "\n"
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, AgentError> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let h: Header = serde_json::from_slice(bytes).map_err(|e| AgentError::RunFile(e.to_string()))?;
        if h.format != RUN_FORMAT {
            return Err(AgentError::RunFile(format!("unexpected format tag {:?}", h.format)));
        }
        if h.version != RUN_VERSION {
            return Err(AgentError::RunFile(format!(
                "run file version {} is not supported (expected {RUN_VERSION})",
                h.version
            )));
        }
        serde_json::from_slice(bytes).map_err(|e| AgentError::RunFile(e.to_string()))
    }

    pub fn count(&self, status: PropertyStatus) -> usize {
        self.properties.iter().filter(|p| p.status == status).count()
    }

    pub fn unvalidated(&self) -> usize {
        self.properties.iter().map(|p| p.unvalidated).sum()
    }

    pub fn tool_executions(&self) -> usize {
        self.properties.iter().map(|p| p.tool_executions).sum()
    }

    /// Adds the usage of earlier pipeline stages and recomputes the total.
    pub fn set_upstream_usage(&mut self, indexing: Option<UsageStats>, extraction: Option<UsageStats>) {
        let rates = self.config.rates;
        self.usage.indexing = indexing;
        self.usage.extraction = extraction;
        let mut total = self.usage.detection;
        for u in [indexing, extraction].into_iter().flatten() {
            total = total.merged(&u, &rates);
        }
        self.usage.total = total;
    }
}

pub fn load_run(path: &Path) -> Result<AuditRun, AgentError> {
    let bytes = std::fs::read(path).map_err(|e| AgentError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    AuditRun::from_json_bytes(&bytes)
}

/// Run-directory-relative transcript path for a property.
pub fn transcript_file_name(property_id: &str) -> String {
    let safe: String = property_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("transcripts/{safe}.json")
}

fn snippet(model: &CodebaseModel, path: &str, span: crate::code::Span) -> String {
    model
        .file_bytes(path)
        .and_then(|b| b.get(span.start..span.end))
        .map(|b| String::from_utf8_lossy(b).into_owned())
        .unwrap_or_default()
}

fn report_from(id: String, outcome: &PropertyOutcome, verdict: &Verdict, model: &CodebaseModel) -> InconsistencyReport {
    let p = &outcome.property;
    InconsistencyReport {
        report_id: id,
        property_id: p.property_id.clone(),
        rfc_section: p.section_ref.clone(),
        statement: p.statement.clone(),
        excerpt: p.source_excerpt.clone(),
        explanation: verdict.explanation.clone(),
        implicated: verdict
            .implicated
            .iter()
            .map(|i| ImplicatedLocation {
                entity_id: i.entity_id.clone(),
                function: i.function.clone(),
                path: i.path.clone(),
                span: i.span,
                lines: i.lines,
                snippet: snippet(model, &i.path, i.span),
            })
            .collect(),
        transcript: transcript_file_name(&p.property_id),
        validated: verdict.validated,
        confidence_note: verdict.confidence_note.clone(),
        status: TriageStatus::Unreviewed,
        novelty: Novelty::Unknown,
    }
}

/// Runs every property (concurrently where the backend allows) and
/// aggregates reports and usage. A failing property does not stop the run.
pub fn run_audit(
    rfc_id: &str,
    properties: &[SemanticProperty],
    tree: &NavTree,
    model: &CodebaseModel,
    client: &LlmClient,
    config: &AgentConfig,
) -> (AuditRun, Vec<PropertyOutcome>) {
    let rates = *client.rates();
    let outcomes = crate::par::map_ordered(properties, client.effective_parallelism(), |p| {
        run_property(p, tree, model, client, config)
    });
    let mut warnings = Vec::new();
    if properties.is_empty() {
        warnings.push("no properties to audit".to_string());
    }
    let mut reports = Vec::new();
    let mut records = Vec::new();
    let mut detection = UsageStats::default();
    for o in &outcomes {
        let mut ids = Vec::new();
        for v in o.verdicts.iter().filter(|v| v.decision == VerdictDecision::Violation) {
            let id = format!("R{:04}", reports.len() + 1);
            reports.push(report_from(id.clone(), o, v, model));
            ids.push(id);
        }
        if o.status == PropertyStatus::Failed {
            warnings.push(format!(
                "property {} failed: {}",
                o.property.property_id,
                o.reason.as_deref().unwrap_or("unknown error")
            ));
        }
        let usage = usage_of(&o.transcript, &rates);
        detection = detection.merged(&usage, &rates);
        records.push(PropertyRecord {
            property_id: o.property.property_id.clone(),
            section_ref: o.property.section_ref.clone(),
            status: o.status,
            reason: o.reason.clone(),
            trace: o.trace.clone(),
            report_ids: ids,
            transcript: transcript_file_name(&o.property.property_id),
            tool_executions: o.tool_executions,
            unvalidated: o.unvalidated,
            gathered: o
                .gathered
                .iter()
                .map(|g| format!("{} [{}]", g.entity_id, g.provenance))
                .collect(),
            usage,
        });
    }
    let run = AuditRun {
        format: RUN_FORMAT.into(),
        version: RUN_VERSION,
        rfc_id: rfc_id.to_string(),
        repository: model.root_label().to_string(),
        config: RunConfig {
            model_tag: config.model_tag.clone(),
            navigation: if tree.uses_summaries {
                "semantic-index"
            } else {
                "names-only"
            }
            .into(),
            max_retrieval: config.max_retrieval,
            max_gathered: config.max_gathered,
            token_budget: config.token_budget,
            context_token_budget: config.context_token_budget,
            fanout: config.fanout,
            ablation: config.ablation.clone(),
            rates,
        },
        properties: records,
        reports,
        usage: RunUsage {
            indexing: None,
            extraction: None,
            detection,
            total: detection,
        },
        warnings,
    };
    (run, outcomes)
}

#[derive(Serialize)]
struct TranscriptFile<'a> {
    property: &'a SemanticProperty,
    status: PropertyStatus,
    reason: &'a Option<String>,
    trace: &'a [DetectionState],
    gathered: &'a [GatheredItem],
    verdicts: &'a [Verdict],
    events: &'a [TranscriptEvent],
}

pub fn transcript_json(outcome: &PropertyOutcome) -> String {
    let file = TranscriptFile {
        property: &outcome.property,
        status: outcome.status,
        reason: &outcome.reason,
        trace: &outcome.trace,
        gathered: &outcome.gathered,
        verdicts: &outcome.verdicts,
        events: &outcome.transcript,
    };
    serde_json::to_string_pretty(&file).expect("transcript serializes") + "\n"
}

/// Writes `run.json` (at `run_json`) and every transcript under
/// `run_dir/transcripts/`.
pub fn write_run_dir(
    run_dir: &Path,
    run_json: &Path,
    run: &AuditRun,
    outcomes: &[PropertyOutcome],
) -> Result<(), AgentError> {
    let io = |path: &Path, e: std::io::Error| AgentError::Io {
        path: path.display().to_string(),
        source: e,
    };
    for o in outcomes {
        let path = run_dir.join(transcript_file_name(&o.property.property_id));
        crate::fsutil::write_atomic(&path, transcript_json(o).as_bytes()).map_err(|e| io(&path, e))?;
    }
    crate::fsutil::write_atomic(run_json, run.to_json().as_bytes()).map_err(|e| io(run_json, e))
}
