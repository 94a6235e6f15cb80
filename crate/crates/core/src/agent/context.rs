use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::protocol::{ToolInvocation, ToolKind};
use super::DetectionState;
use crate::code::{Entity, Span};
use crate::error::LlmError;
use crate::llm::{estimate_tokens, ChatRequest, LlmClient, Message, Rates, TokenUsage, UsageStats};
use crate::rfc::SemanticProperty;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Localized,
    Tool { tool: ToolKind },
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Localized => f.write_str("localized"),
            Provenance::Tool { tool } => write!(f, "tool:{}", tool.as_str()),
        }
    }
}

/// One code entity shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatheredItem {
    pub entity_id: String,
    /// `function`, `struct`, `union`, `enum`, `typedef` or `macro`.
    pub kind: String,
    pub name: String,
    pub path: String,
    pub span: Span,
    /// 1-based inclusive line range.
    pub lines: (usize, usize),
    pub text: String,
    /// Shown instead of the text when the item is elided.
    pub summary: String,
    pub provenance: Provenance,
    /// Agent step that added the item (0 is localization).
    pub step: usize,
}

impl GatheredItem {
    pub fn from_entity(
        entity: Entity<'_>,
        lines: (usize, usize),
        summary: String,
        provenance: Provenance,
        step: usize,
    ) -> Self {
        GatheredItem {
            entity_id: entity.id().to_string(),
            kind: entity.kind_label().to_string(),
            name: entity.name().to_string(),
            path: entity.path().to_string(),
            span: entity.span(),
            lines,
            text: entity.text().to_string(),
            summary,
            provenance,
            step,
        }
    }

    fn header(&self) -> String {
        format!(
            "{} {} ({}:{}-{}) [{}]",
            self.kind, self.name, self.path, self.lines.0, self.lines.1, self.provenance
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddOutcome {
    Added,
    Duplicate,
    CapReached,
}

/// Everything logged for one property, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TranscriptEvent {
    State {
        state: DetectionState,
    },
    Llm {
        step: usize,
        purpose: String,
        request_hash: String,
        system: String,
        messages: Vec<Message>,
        response: String,
        input_tokens: u64,
        output_tokens: u64,
        latency_ms: u64,
    },
    Tool {
        step: usize,
        invocation: ToolInvocation,
        observation: String,
        added: Vec<String>,
    },
    Note {
        text: String,
    },
}

/// Usage of the model calls in a transcript.
pub fn usage_of(transcript: &[TranscriptEvent], rates: &Rates) -> UsageStats {
    let mut u = UsageStats::default();
    for e in transcript {
        if let TranscriptEvent::Llm {
            input_tokens,
            output_tokens,
            latency_ms,
            ..
        } = e
        {
            u.add_call(
                TokenUsage {
                    input_tokens: *input_tokens,
                    output_tokens: *output_tokens,
                },
                *latency_ms,
                rates,
            );
        }
    }
    u
}

#[derive(Debug, Clone)]
pub struct AgentContext {
    pub property: SemanticProperty,
    gathered: Vec<GatheredItem>,
    ids: HashSet<String>,
    pub transcript: Vec<TranscriptEvent>,
    /// Condensed record of earlier detection and retrieval steps, fed back
    /// into later prompts.
    pub history: Vec<String>,
    pub retrieval_remaining: usize,
    pub tokens_used: u64,
    pub token_budget: u64,
    pub max_gathered: usize,
}

impl AgentContext {
    pub fn new(property: SemanticProperty, max_retrieval: usize, token_budget: u64, max_gathered: usize) -> Self {
        AgentContext {
            property,
            gathered: Vec::new(),
            ids: HashSet::new(),
            transcript: Vec::new(),
            history: Vec::new(),
            retrieval_remaining: max_retrieval,
            tokens_used: 0,
            token_budget,
            max_gathered,
        }
    }

    pub fn gathered(&self) -> &[GatheredItem] {
        &self.gathered
    }

    pub fn contains(&self, entity_id: &str) -> bool {
        self.ids.contains(entity_id)
    }

    pub fn add(&mut self, item: GatheredItem) -> AddOutcome {
        if self.ids.contains(&item.entity_id) {
            return AddOutcome::Duplicate;
        }
        if self.gathered.len() >= self.max_gathered {
            return AddOutcome::CapReached;
        }
        self.ids.insert(item.entity_id.clone());
        self.gathered.push(item);
        AddOutcome::Added
    }

    pub fn tokens_exhausted(&self) -> bool {
        self.tokens_used >= self.token_budget
    }

    /// Renders gathered code for a prompt. When the estimate exceeds
    /// `budget`, items are replaced by their summaries: tool-retrieved
    /// items oldest first, then localized seeds oldest first.
    pub fn render_code(&self, budget: u64) -> String {
        let full: Vec<String> = self
            .gathered
            .iter()
            .map(|g| format!("### {}\n```c\n{}\n```\n", g.header(), g.text))
            .collect();
        let elided: Vec<String> = self
            .gathered
            .iter()
            .map(|g| format!("### {} (elided)\n{}\n", g.header(), g.summary))
            .collect();
        let mut use_full = vec![true; self.gathered.len()];
        let total = |use_full: &[bool]| -> u64 {
            use_full
                .iter()
                .enumerate()
                .map(|(i, &f)| estimate_tokens(if f { &full[i] } else { &elided[i] }))
                .sum()
        };
        let mut order: Vec<usize> = (0..self.gathered.len())
            .filter(|&i| self.gathered[i].provenance != Provenance::Localized)
            .collect();
        order.extend((0..self.gathered.len()).filter(|&i| self.gathered[i].provenance == Provenance::Localized));
        for i in order {
            if total(&use_full) <= budget {
                break;
            }
            use_full[i] = false;
        }
        if self.gathered.is_empty() {
            return "(none)".into();
        }
        use_full
            .iter()
            .enumerate()
            .map(|(i, &f)| if f { full[i].as_str() } else { elided[i].as_str() })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn note(&mut self, text: String) {
        tracing::debug!(property = %self.property.property_id, "{text}");
        self.transcript.push(TranscriptEvent::Note { text });
    }

    pub fn enter(&mut self, state: DetectionState) {
        self.transcript.push(TranscriptEvent::State { state });
    }

    /// Sends a request, logs the exchange and parses the reply. An
    /// unparsable reply is answered with a format reminder once; a second
    /// failure yields `None`.
    pub fn ask<T>(
        &mut self,
        client: &LlmClient,
        mut request: ChatRequest,
        step: usize,
        mut parse: impl FnMut(&str) -> Result<T, String>,
    ) -> Result<Option<T>, LlmError> {
        for attempt in 0..2 {
            let response = client.complete(&request)?;
            self.tokens_used += response.usage.input_tokens + response.usage.output_tokens;
            self.transcript.push(TranscriptEvent::Llm {
                step,
                purpose: request.purpose.clone(),
                request_hash: request.request_hash(),
                system: request.system.clone(),
                messages: request.messages.clone(),
                response: response.content.clone(),
                input_tokens: response.usage.input_tokens,
                output_tokens: response.usage.output_tokens,
                latency_ms: response.latency_ms,
            });
            match parse(&response.content) {
                Ok(v) => return Ok(Some(v)),
                Err(e) => {
                    self.note(format!("malformed reply ({}): {e}", request.purpose));
                    if attempt == 1 || self.tokens_exhausted() {
                        break;
                    }
                    request.messages.push(Message::assistant(response.content));
                    request.messages.push(Message::user(format!(
                        "Your reply could not be used: {e}. Reply again with exactly one fenced JSON block that follows the schema in the instructions."
                    )));
                }
            }
        }
        Ok(None)
    }

    /// Usage of every model call logged so far.
    pub fn usage(&self, rates: &Rates) -> UsageStats {
        usage_of(&self.transcript, rates)
    }

    pub fn render_history(&self) -> String {
        if self.history.is_empty() {
            "(none)".into()
        } else {
            self.history.join("\n\n")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfc::Modality;

    fn property() -> SemanticProperty {
        SemanticProperty {
            property_id: "RFC1:1:1".into(),
            rfc_id: "RFC1".into(),
            section_ref: "1".into(),
            section_heading: "H".into(),
            statement: "s".into(),
            modality: Modality::Must,
            source_excerpt: "x MUST y".into(),
        }
    }

    fn item(id: &str, provenance: Provenance, size: usize) -> GatheredItem {
        GatheredItem {
            entity_id: id.into(),
            kind: "function".into(),
            name: id.into(),
            path: "a.c".into(),
            span: Span::new(0, size),
            lines: (1, 2),
            text: "x".repeat(size),
            summary: format!("summary of {id}"),
            provenance,
            step: 0,
        }
    }

    #[test]
    fn duplicate_free_and_capped() {
        let mut ctx = AgentContext::new(property(), 6, 1000, 2);
        assert_eq!(ctx.add(item("a", Provenance::Localized, 4)), AddOutcome::Added);
        assert_eq!(ctx.add(item("a", Provenance::Localized, 4)), AddOutcome::Duplicate);
        let tool = Provenance::Tool { tool: ToolKind::Query };
        assert_eq!(ctx.add(item("b", tool, 4)), AddOutcome::Added);
        assert_eq!(ctx.add(item("c", tool, 4)), AddOutcome::CapReached);
        assert_eq!(ctx.gathered().len(), 2);
    }

    #[test]
    fn elides_tool_items_before_seeds() {
        let mut ctx = AgentContext::new(property(), 6, 1000, 10);
        let tool = Provenance::Tool {
            tool: ToolKind::QueryCallee,
        };
        ctx.add(item("seed", Provenance::Localized, 400));
        ctx.add(item("old", tool, 400));
        ctx.add(item("new", tool, 400));
        let all = ctx.render_code(10_000);
        assert!(!all.contains("elided"));
        let some = ctx.render_code(250);
        assert!(some.contains("old (a.c:1-2) [tool:query_callee] (elided)"));
        assert!(!some.contains("new (a.c:1-2) [tool:query_callee] (elided)"));
        assert!(!some.contains("seed (a.c:1-2) [localized] (elided)"));
        let tight = ctx.render_code(1);
        assert!(tight.contains("seed (a.c:1-2) [localized] (elided)"));
    }
}
