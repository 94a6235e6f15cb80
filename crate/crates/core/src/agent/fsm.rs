//! The per-property state machine.

use serde::{Deserialize, Serialize};

use super::context::{AddOutcome, AgentContext, GatheredItem, Provenance, TranscriptEvent};
use super::localize::{localize, NavTree};
use super::protocol::{parse_detection, parse_validation, tool_specs, Citation, DetectionReply, ToolInvocation};
use super::tools::execute_tool;
use super::{AgentConfig, DetectionState};
use crate::code::{CodebaseModel, Entity, Span};
use crate::error::LlmError;
use crate::llm::{ChatRequest, LlmClient};
use crate::rfc::SemanticProperty;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictDecision {
    Violation,
    Conformant,
    Inconclusive,
}

/// A cited code location, always inside a gathered entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Implicated {
    pub entity_id: String,
    pub function: String,
    pub path: String,
    pub span: Span,
    /// 1-based inclusive line range.
    pub lines: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: VerdictDecision,
    pub explanation: String,
    pub implicated: Vec<Implicated>,
    /// The reviewer's rationale, or why there was no review.
    pub confidence_note: String,
    pub validated: bool,
    /// Found by the reviewer rather than by detection.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub from_review: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyStatus {
    Conformant,
    Violation,
    Inconclusive,
    /// The model backend failed; the property was not judged.
    Failed,
}

#[derive(Debug, Clone)]
pub struct PropertyOutcome {
    pub property: SemanticProperty,
    pub status: PropertyStatus,
    pub reason: Option<String>,
    pub trace: Vec<DetectionState>,
    pub verdicts: Vec<Verdict>,
    pub transcript: Vec<TranscriptEvent>,
    pub gathered: Vec<GatheredItem>,
    pub tool_executions: usize,
    /// Violations kept because the review reply was unusable.
    pub unvalidated: usize,
    pub tokens_used: u64,
}

struct Run<'a, 'm> {
    ctx: AgentContext,
    trace: Vec<DetectionState>,
    tree: &'a NavTree,
    model: &'m CodebaseModel,
    client: &'a LlmClient,
    config: &'a AgentConfig,
    step: usize,
    tool_executions: usize,
    unvalidated: usize,
    verdicts: Vec<Verdict>,
}

/// A parsed detection reply with its resolved and unresolved citations.
type Detected = (DetectionReply, Vec<Implicated>, Vec<String>);

enum End {
    Conformant,
    Violation,
    Inconclusive(String),
}

/// Checks one property. Never fails: backend errors end the property with
/// status `Failed` and are recorded in the transcript.
pub fn run_property(
    property: &SemanticProperty,
    tree: &NavTree,
    model: &CodebaseModel,
    client: &LlmClient,
    config: &AgentConfig,
) -> PropertyOutcome {
    let mut run = Run {
        ctx: AgentContext::new(
            property.clone(),
            config.max_retrieval,
            config.token_budget,
            config.max_gathered,
        ),
        trace: Vec::new(),
        tree,
        model,
        client,
        config,
        step: 0,
        tool_executions: 0,
        unvalidated: 0,
        verdicts: Vec::new(),
    };
    let (status, reason) = match run.drive() {
        Ok(End::Conformant) => {
            run.enter(DetectionState::ConcludedConformant);
            (PropertyStatus::Conformant, None)
        }
        Ok(End::Violation) => {
            run.enter(DetectionState::ConcludedViolation);
            (PropertyStatus::Violation, None)
        }
        Ok(End::Inconclusive(reason)) => {
            run.enter(DetectionState::ConcludedInconclusive);
            run.ctx.note(format!("inconclusive: {reason}"));
            (PropertyStatus::Inconclusive, Some(reason))
        }
        Err(e) => {
            run.enter(DetectionState::ConcludedInconclusive);
            run.ctx.note(format!("model backend failed: {e}"));
            run.verdicts.clear();
            (PropertyStatus::Failed, Some(e.to_string()))
        }
    };
    PropertyOutcome {
        property: property.clone(),
        status,
        reason,
        trace: run.trace,
        verdicts: run.verdicts,
        gathered: run.ctx.gathered().to_vec(),
        tokens_used: run.ctx.tokens_used,
        transcript: run.ctx.transcript,
        tool_executions: run.tool_executions,
        unvalidated: run.unvalidated,
    }
}

impl<'a, 'm> Run<'a, 'm> {
    fn enter(&mut self, state: DetectionState) {
        self.trace.push(state);
        self.ctx.enter(state);
    }

    fn lines(&self, entity: &Entity<'_>) -> (usize, usize) {
        let span = entity.span();
        let start = self.model.line_of(entity.path(), span.start).unwrap_or(1);
        let end = self
            .model
            .line_of(entity.path(), span.end.saturating_sub(1).max(span.start))
            .unwrap_or(start);
        (start, end)
    }

    fn item(&self, entity: Entity<'_>, provenance: Provenance) -> GatheredItem {
        let summary = match entity {
            Entity::Function(f) => self
                .tree
                .function_summary(&f.id)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .unwrap_or_else(|| f.signature.clone()),
            Entity::Definition(d) => d.definition_text.lines().next().unwrap_or_default().to_string(),
        };
        let lines = self.lines(&entity);
        GatheredItem::from_entity(entity, lines, summary, provenance, self.step)
    }

    fn drive(&mut self) -> Result<End, LlmError> {
        self.enter(DetectionState::Localization);
        let seeds = localize(&mut self.ctx, self.tree, self.model, self.client, self.config)?;
        if seeds.is_empty() {
            if self.ctx.tokens_exhausted() {
                return Ok(End::Inconclusive("token budget exhausted".into()));
            }
            return Ok(End::Inconclusive("no relevant code".into()));
        }
        for f in seeds {
            let item = self.item(Entity::Function(f), Provenance::Localized);
            if self.ctx.add(item) == AddOutcome::CapReached {
                self.ctx
                    .note(format!("gathered-items cap reached; seed {} not added", f.name));
            }
        }
        loop {
            self.enter(DetectionState::Detection);
            if self.ctx.tokens_exhausted() {
                return Ok(End::Inconclusive("token budget exhausted".into()));
            }
            self.step += 1;
            let Some((reply, implicated, unresolved)) = self.detect()? else {
                return Ok(End::Inconclusive("malformed model output".into()));
            };
            match reply {
                DetectionReply::Conformant { explanation } => {
                    self.ctx
                        .history
                        .push(format!("Step {} (detection): conformant. {explanation}", self.step));
                    return Ok(End::Conformant);
                }
                DetectionReply::Insufficient { explanation, requests } => {
                    self.ctx.history.push(format!(
                        "Step {} (detection): more context needed. {explanation}\nRequested: {}",
                        self.step,
                        requests
                            .iter()
                            .map(ToolInvocation::describe)
                            .collect::<Vec<_>>()
                            .join(", ")
                    ));
                    if self.config.ablation.no_retrieval {
                        return Ok(End::Inconclusive(
                            "more context needed but retrieval is disabled".into(),
                        ));
                    }
                    if self.ctx.retrieval_remaining == 0 {
                        return Ok(End::Inconclusive("retrieval budget exhausted".into()));
                    }
                    self.enter(DetectionState::Retrieval);
                    self.ctx.retrieval_remaining -= 1;
                    self.step += 1;
                    self.retrieve(&requests);
                }
                DetectionReply::BugCandidate { explanation, .. } => {
                    for u in unresolved {
                        self.ctx
                            .note(format!("dropped citation of {u}: not in the gathered code"));
                    }
                    let candidate = Verdict {
                        decision: VerdictDecision::Violation,
                        explanation,
                        implicated,
                        confidence_note: String::new(),
                        validated: false,
                        from_review: false,
                    };
                    self.ctx.history.push(format!(
                        "Step {} (detection): violation. {}",
                        self.step, candidate.explanation
                    ));
                    if self.config.ablation.no_validation {
                        self.verdicts.push(Verdict {
                            confidence_note: "not reviewed: validation disabled".into(),
                            ..candidate
                        });
                        return Ok(End::Violation);
                    }
                    self.enter(DetectionState::Validation);
                    return self.validate(candidate);
                }
            }
        }
    }

    fn detect(&mut self) -> Result<Option<Detected>, LlmError> {
        let enabled = self.config.enabled_tools();
        let specs = tool_specs(&enabled);
        let tools_text = specs
            .iter()
            .map(|t| format!("- {}: {}", t.name, t.description))
            .collect::<Vec<_>>()
            .join("\n");
        let context = self.ctx.render_code(self.config.context_token_budget);
        let history = self.ctx.render_history();
        let p = &self.ctx.property;
        let rendered = self.config.prompts.get("agent_detect").render(&[
            ("tools", &tools_text),
            ("property_id", &p.property_id),
            ("section", &p.section_ref),
            ("property", &p.statement),
            ("excerpt", &p.source_excerpt),
            ("context", &context),
            ("history", &history),
        ]);
        let request = ChatRequest::new("agent.detect", &self.config.model_tag, rendered.system, rendered.user)
            .with_tools(specs)
            .with_max_output_tokens(self.config.max_output_tokens)
            .with_stream(p.property_id.clone());
        let gathered = self.ctx.gathered().to_vec();
        let model = self.model;
        self.ctx.ask(self.client, request, self.step, |text| {
            let reply = parse_detection(text)?;
            let (implicated, unresolved) = match &reply {
                DetectionReply::BugCandidate { implicated, .. } => {
                    let (found, missing) = resolve_citations(implicated, &gathered, model);
                    if found.is_empty() {
                        return Err(format!(
                            "none of the implicated functions ({}) is in the code shown; cite only functions listed under \"Code gathered so far\"",
                            missing.join(", ")
                        ));
                    }
                    (found, missing)
                }
                _ => (Vec::new(), Vec::new()),
            };
            Ok((reply, implicated, unresolved))
        })
    }

    fn retrieve(&mut self, requests: &[ToolInvocation]) {
        let mut results = Vec::new();
        let mut seen: Vec<&ToolInvocation> = Vec::new();
        for inv in requests {
            if seen.contains(&inv) {
                continue;
            }
            seen.push(inv);
            let kind = inv.kind();
            if self.config.ablation.disabled_tools.contains(&kind) {
                let observation = format!("error: tool {} is disabled", kind.as_str());
                results.push(format!("- {}: {observation}", inv.describe()));
                self.ctx.transcript.push(TranscriptEvent::Tool {
                    step: self.step,
                    invocation: inv.clone(),
                    observation,
                    added: Vec::new(),
                });
                continue;
            }
            self.tool_executions += 1;
            let obs = {
                let ctx = &self.ctx;
                execute_tool(inv, self.model, &|id| ctx.contains(id))
            };
            let mut lines = Vec::new();
            let mut added = Vec::new();
            if let Some(m) = &obs.message {
                lines.push(m.clone());
            }
            for entity in &obs.entities {
                let item = self.item(*entity, Provenance::Tool { tool: kind });
                let where_ = format!(
                    "{} {} ({}:{}-{})",
                    item.kind, item.name, item.path, item.lines.0, item.lines.1
                );
                let id = item.entity_id.clone();
                match self.ctx.add(item) {
                    AddOutcome::Added => {
                        lines.push(format!("added {where_}"));
                        added.push(id);
                    }
                    AddOutcome::Duplicate => lines.push(format!("{where_} is already shown")),
                    AddOutcome::CapReached => lines.push(format!("{where_} not added: gathered-items cap reached")),
                }
            }
            let observation = lines.join("; ");
            results.push(format!("- {}: {observation}", inv.describe()));
            self.ctx.transcript.push(TranscriptEvent::Tool {
                step: self.step,
                invocation: inv.clone(),
                observation,
                added,
            });
        }
        let invocations = requests
            .iter()
            .map(ToolInvocation::describe)
            .collect::<Vec<_>>()
            .join(", ");
        let rendered = self
            .config
            .prompts
            .get("agent_retrieve")
            .render(&[("invocations", &invocations), ("results", &results.join("\n"))]);
        self.ctx.history.push(format!(
            "Step {} (retrieval): {}\n{}",
            self.step, rendered.system, rendered.user
        ));
    }

    fn validate(&mut self, candidate: Verdict) -> Result<End, LlmError> {
        if self.ctx.tokens_exhausted() {
            return Ok(End::Inconclusive("token budget exhausted".into()));
        }
        self.step += 1;
        let candidate_text = format!(
            "Explanation: {}\nImplicated: {}",
            candidate.explanation,
            candidate
                .implicated
                .iter()
                .map(|i| format!("{} ({}:{}-{})", i.function, i.path, i.lines.0, i.lines.1))
                .collect::<Vec<_>>()
                .join(", ")
        );
        let context = self.ctx.render_code(self.config.context_token_budget);
        let history = self.ctx.render_history();
        let p = &self.ctx.property;
        let rendered = self.config.prompts.get("agent_validate").render(&[
            ("property_id", &p.property_id),
            ("section", &p.section_ref),
            ("property", &p.statement),
            ("excerpt", &p.source_excerpt),
            ("context", &context),
            ("history", &history),
            ("candidate", &candidate_text),
        ]);
        let request = ChatRequest::new("agent.validate", &self.config.model_tag, rendered.system, rendered.user)
            .with_max_output_tokens(self.config.max_output_tokens)
            .with_stream(p.property_id.clone());
        let Some(review) = self.ctx.ask(self.client, request, self.step, parse_validation)? else {
            self.unvalidated += 1;
            self.verdicts.push(Verdict {
                confidence_note: "not reviewed: review reply was unusable".into(),
                ..candidate
            });
            return Ok(End::Violation);
        };
        let gathered = self.ctx.gathered().to_vec();
        let mut extra = Vec::new();
        for finding in review.additional {
            let (found, missing) = resolve_citations(&finding.implicated, &gathered, self.model);
            for m in &missing {
                self.ctx
                    .note(format!("dropped review citation of {m}: not in the gathered code"));
            }
            if found.is_empty() {
                self.ctx
                    .note("dropped an additional finding without usable citations".into());
                continue;
            }
            extra.push(Verdict {
                decision: VerdictDecision::Violation,
                explanation: finding.explanation,
                implicated: found,
                confidence_note: review.rationale.clone(),
                validated: true,
                from_review: true,
            });
        }
        if review.confirmed {
            self.verdicts.push(Verdict {
                confidence_note: review.rationale,
                validated: true,
                ..candidate
            });
        } else {
            self.ctx.note(format!("candidate refuted: {}", review.rationale));
        }
        self.verdicts.extend(extra);
        Ok(if self.verdicts.is_empty() {
            End::Conformant
        } else {
            End::Violation
        })
    }
}

fn path_matches(actual: &str, wanted: &str) -> bool {
    let wanted = wanted.trim_start_matches("./");
    actual == wanted || actual.ends_with(&format!("/{wanted}"))
}

/// Maps model citations onto gathered items. Returns the resolved
/// locations and the citations that match nothing.
fn resolve_citations(
    citations: &[Citation],
    gathered: &[GatheredItem],
    model: &CodebaseModel,
) -> (Vec<Implicated>, Vec<String>) {
    let mut found: Vec<Implicated> = Vec::new();
    let mut missing = Vec::new();
    for c in citations {
        let matches: Vec<&GatheredItem> = gathered
            .iter()
            .filter(|g| g.name == c.function && c.path.as_deref().is_none_or(|p| path_matches(&g.path, p)))
            .collect();
        if matches.is_empty() {
            missing.push(match &c.path {
                Some(p) => format!("{p}:{}", c.function),
                None => c.function.clone(),
            });
            continue;
        }
        for g in matches {
            let (span, lines) = match c.lines {
                Some((a, b)) if a >= g.lines.0 && b <= g.lines.1 => {
                    let start = model.line_start(&g.path, a).unwrap_or(g.span.start).max(g.span.start);
                    let end = model
                        .line_start(&g.path, b + 1)
                        .unwrap_or(g.span.end)
                        .min(g.span.end)
                        .max(start);
                    (Span::new(start, end), (a, b))
                }
                _ => (g.span, g.lines),
            };
            let imp = Implicated {
                entity_id: g.entity_id.clone(),
                function: g.name.clone(),
                path: g.path.clone(),
                span,
                lines,
            };
            if !found.contains(&imp) {
                found.push(imp);
            }
        }
    }
    (found, missing)
}
