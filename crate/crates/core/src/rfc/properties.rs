//! Extraction of mandatory requirements ("semantic properties") from leaf
//! sections.

use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::document::{RfcDocument, RfcSection};
use crate::agent::protocol::extract_json_block;
use crate::code::Span;
use crate::error::RfcError;
use crate::llm::{ChatRequest, LlmClient, UsageStats};
use crate::prompts::PromptSet;

pub const PROPERTIES_VERSION: u32 = 1;
const PROPERTIES_FORMAT: &str = "rfc-audit-properties";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "MUST")]
    Must,
    #[serde(rename = "MUST_NOT")]
    MustNot,
    #[serde(rename = "SHALL")]
    Shall,
    #[serde(rename = "REQUIRED")]
    Required,
}

impl Modality {
    /// Maps a keyword to a mandatory modality; advisory keywords yield
    /// `None`.
    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['_', '-'], " ");
        match norm.split_whitespace().collect::<Vec<_>>().join(" ").as_str() {
            "MUST" => Some(Modality::Must),
            "MUST NOT" | "SHALL NOT" => Some(Modality::MustNot),
            "SHALL" => Some(Modality::Shall),
            "REQUIRED" => Some(Modality::Required),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Must => "MUST",
            Modality::MustNot => "MUST_NOT",
            Modality::Shall => "SHALL",
            Modality::Required => "REQUIRED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticProperty {
    pub property_id: String,
    pub rfc_id: String,
    pub section_ref: String,
    pub section_heading: String,
    pub statement: String,
    pub modality: Modality,
    /// Verbatim slice of the section body.
    pub source_excerpt: String,
}

pub fn property_id(rfc_id: &str, section: &str, ordinal: usize) -> String {
    format!("{}:{section}:{ordinal}", rfc_id.replace(' ', ""))
}

/// True when the text contains an uppercase MUST, SHALL or REQUIRED.
pub fn has_mandatory_keyword(text: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(MUST|SHALL|REQUIRED)\b").expect("valid regex"))
        .is_match(text)
}

/// Finds `excerpt` in `body`, treating any whitespace run as equivalent to
/// any other. Returns the span of the matching original bytes.
pub fn locate_excerpt(body: &str, excerpt: &str) -> Option<Span> {
    let needle = excerpt.trim();
    if needle.is_empty() {
        return None;
    }
    if let Some(i) = body.find(needle) {
        return Some(Span::new(i, i + needle.len()));
    }
    // Normalized body with a map from normalized char positions back to
    // original byte offsets.
    let mut norm = String::with_capacity(body.len());
    let mut starts: Vec<usize> = Vec::with_capacity(body.len());
    let mut ends: Vec<usize> = Vec::with_capacity(body.len());
    let mut in_ws = false;
    for (i, ch) in body.char_indices() {
        if ch.is_whitespace() {
            if !in_ws && !norm.is_empty() {
                norm.push(' ');
                starts.push(i);
                ends.push(i + ch.len_utf8());
            }
            in_ws = true;
        } else {
            norm.push(ch);
            for _ in 0..ch.len_utf8() {
                starts.push(i);
                ends.push(i + ch.len_utf8());
            }
            in_ws = false;
        }
    }
    let needle = super::document::normalize_whitespace(needle);
    let at = norm.find(&needle)?;
    let last = at + needle.len() - 1;
    Some(Span::new(starts[at], ends[last]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionStatus {
    Processed,
    /// No mandatory keyword; the model was not asked.
    Skipped,
    /// The model failed or never produced a usable reply.
    Unprocessed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionRecord {
    pub number: String,
    pub heading: String,
    pub body: String,
    pub status: SectionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub property_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub rfc_id: String,
    pub title: String,
    pub section_count: usize,
    pub warnings: Vec<String>,
}

/// The properties document consumed by the audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertiesFile {
    pub format: String,
    pub version: u32,
    pub document: DocumentMeta,
    pub properties: Vec<SemanticProperty>,
    pub sections: Vec<SectionRecord>,
    pub diagnostics: Vec<String>,
    pub usage: UsageStats,
}

impl PropertiesFile {
    pub fn new(document: DocumentMeta) -> Self {
        PropertiesFile {
            format: PROPERTIES_FORMAT.into(),
            version: PROPERTIES_VERSION,
            document,
            properties: Vec::new(),
            sections: Vec::new(),
            diagnostics: Vec::new(),
            usage: UsageStats::default(),
        }
    }

    pub fn section(&self, number: &str) -> Option<&SectionRecord> {
        self.sections.iter().find(|s| s.number == number)
    }

    pub fn unprocessed(&self) -> impl Iterator<Item = &SectionRecord> {
        self.sections.iter().filter(|s| s.status == SectionStatus::Unprocessed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("properties serialize") + "\n"
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, RfcError> {
        #[derive(Deserialize)]
        struct Header {
            format: Option<String>,
            version: Option<u32>,
        }
        let header: Header = serde_json::from_slice(bytes).map_err(|e| RfcError::Parse(e.to_string()))?;
        if header.format.as_deref() != Some(PROPERTIES_FORMAT) {
            return Err(RfcError::Parse(format!("unexpected format tag {:?}", header.format)));
        }
        if header.version != Some(PROPERTIES_VERSION) {
            return Err(RfcError::Version {
                found: header.version.unwrap_or(0),
                expected: PROPERTIES_VERSION,
            });
        }
        let file: PropertiesFile = serde_json::from_slice(bytes).map_err(|e| RfcError::Parse(e.to_string()))?;
        for p in &file.properties {
            let Some(section) = file.section(&p.section_ref) else {
                return Err(RfcError::Parse(format!(
                    "{} cites unknown section {}",
                    p.property_id, p.section_ref
                )));
            };
            if !section.body.contains(&p.source_excerpt) {
                return Err(RfcError::Parse(format!("{}: excerpt is not verbatim", p.property_id)));
            }
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, RfcError> {
        let bytes = std::fs::read(path).map_err(|e| RfcError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json_bytes(&bytes)
    }
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub model_tag: String,
    /// Skip sections without MUST/SHALL/REQUIRED. Turn off for documents
    /// predating that keyword convention.
    pub keyword_filter: bool,
    /// Characters of enclosing-section prose given as context.
    pub parent_context_chars: usize,
    pub prompts: PromptSet,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            model_tag: "claude-3-5-sonnet-20241022".into(),
            keyword_filter: true,
            parent_context_chars: 2000,
            prompts: PromptSet::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionExtraction {
    pub properties: Vec<SemanticProperty>,
    pub status: SectionStatus,
    pub reason: Option<String>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct ReplyProperty {
    statement: String,
    modality: String,
    excerpt: String,
}

#[derive(Debug, Deserialize)]
struct Reply {
    properties: Vec<ReplyProperty>,
}

/// One candidate from a model reply, checked against the section body.
#[derive(Debug)]
enum Checked {
    Valid {
        statement: String,
        modality: Modality,
        excerpt: String,
    },
    Advisory(String),
    NotVerbatim(String),
}

fn parse_reply(text: &str, body: &str) -> Result<Vec<Checked>, String> {
    let json = extract_json_block(text).ok_or("no JSON block in reply")?;
    let reply: Reply = serde_json::from_str(json).map_err(|e| format!("reply does not match schema: {e}"))?;
    Ok(reply
        .properties
        .into_iter()
        .map(|p| match Modality::parse(&p.modality) {
            None => Checked::Advisory(p.modality),
            Some(modality) => match locate_excerpt(body, &p.excerpt) {
                Some(span) => Checked::Valid {
                    statement: p.statement.trim().to_string(),
                    modality,
                    excerpt: body[span.start..span.end].to_string(),
                },
                None => Checked::NotVerbatim(p.excerpt),
            },
        })
        .collect())
}

fn parent_context(ancestors: &[&RfcSection], cap: usize) -> String {
    let mut s = String::new();
    for a in ancestors {
        s.push_str(&format!("{} {}\n{}\n", a.number, a.heading, a.body.trim()));
    }
    if s.trim().is_empty() {
        return "(none)".into();
    }
    if s.chars().count() > cap {
        s = s.chars().take(cap).collect::<String>() + " [...]";
    }
    s
}

/// Extracts mandatory properties from one leaf section. A reply with a
/// malformed block or a non-verbatim excerpt is retried once; on the second
/// attempt offending entries are dropped with a diagnostic.
pub fn extract_properties(
    doc_rfc_id: &str,
    ancestors: &[&RfcSection],
    section: &RfcSection,
    client: &LlmClient,
    opts: &ExtractOptions,
) -> SectionExtraction {
    let mut out = SectionExtraction {
        properties: Vec::new(),
        status: SectionStatus::Processed,
        reason: None,
        diagnostics: Vec::new(),
    };
    if section.body.trim().is_empty() {
        out.status = SectionStatus::Skipped;
        out.reason = Some("empty section".into());
        return out;
    }
    if opts.keyword_filter && !has_mandatory_keyword(&section.body) {
        out.status = SectionStatus::Skipped;
        out.reason = Some("no mandatory keyword".into());
        return out;
    }
    let ctx = parent_context(ancestors, opts.parent_context_chars);
    let rendered = opts.prompts.get("rfc_extract").render(&[
        ("rfc_id", doc_rfc_id),
        ("section_number", &section.number),
        ("heading", &section.heading),
        ("parent_context", &ctx),
        ("body", section.body.trim_end()),
    ]);
    let base = ChatRequest::new("rfc.extract", &opts.model_tag, rendered.system, rendered.user);

    let first_text;
    let first = match client.complete(&base) {
        Ok(r) => {
            let parsed = parse_reply(&r.content, &section.body);
            first_text = r.content;
            parsed
        }
        Err(e) => {
            out.status = SectionStatus::Unprocessed;
            out.reason = Some(format!("model call failed: {e}"));
            return out;
        }
    };
    let needs_retry = match &first {
        Err(_) => true,
        Ok(items) => items.iter().any(|c| matches!(c, Checked::NotVerbatim(_))),
    };
    let final_items = if needs_retry {
        let complaint = match &first {
            Err(e) => format!("Your previous reply was rejected: {e}. Reply with exactly one fenced JSON block."),
            Ok(items) => {
                let bad: Vec<String> = items
                    .iter()
                    .filter_map(|c| match c {
                        Checked::NotVerbatim(x) => Some(format!("- {x:?}")),
                        _ => None,
                    })
                    .collect();
                for b in &bad {
                    out.diagnostics
                        .push(format!("section {}: rejected non-verbatim excerpt {b}", section.number));
                }
                format!(
                    "These excerpts do not occur verbatim in the section text:\n{}\nCopy excerpts character for character and reply again with the full JSON block.",
                    bad.join("\n")
                )
            }
        };
        let mut retry = base.clone();
        retry.messages.push(crate::llm::Message::assistant(first_text));
        retry.messages.push(crate::llm::Message::user(complaint));
        match client.complete(&retry).map(|r| parse_reply(&r.content, &section.body)) {
            Ok(Ok(items)) => Ok(items),
            Ok(Err(e)) => first.map_err(|_| e),
            Err(e) => first.map_err(|_| e.to_string()),
        }
    } else {
        first
    };

    let items = match final_items {
        Ok(items) => items,
        Err(e) => {
            out.status = SectionStatus::Unprocessed;
            out.reason = Some(format!("malformed reply after retry: {e}"));
            return out;
        }
    };
    for item in items {
        match item {
            Checked::Valid {
                statement,
                modality,
                excerpt,
            } => {
                let ordinal = out.properties.len() + 1;
                out.properties.push(SemanticProperty {
                    property_id: property_id(doc_rfc_id, &section.number, ordinal),
                    rfc_id: doc_rfc_id.to_string(),
                    section_ref: section.number.clone(),
                    section_heading: section.heading.clone(),
                    statement,
                    modality,
                    source_excerpt: excerpt,
                });
            }
            Checked::Advisory(m) => out.diagnostics.push(format!(
                "section {}: dropped non-mandatory property ({m})",
                section.number
            )),
            Checked::NotVerbatim(x) => out.diagnostics.push(format!(
                "section {}: dropped property with non-verbatim excerpt {x:?}",
                section.number
            )),
        }
    }
    out
}

/// Runs extraction over every leaf section of the document.
pub fn extract_all(doc: &RfcDocument, client: &LlmClient, opts: &ExtractOptions) -> PropertiesFile {
    let mark = client.call_count();
    let walk = doc.walk();
    let mut file = PropertiesFile::new(DocumentMeta {
        rfc_id: doc.rfc_id.clone(),
        title: doc.title.clone(),
        section_count: walk.len(),
        warnings: doc.warnings.clone(),
    });
    let leaves: Vec<_> = walk.iter().filter(|(_, s)| s.is_leaf()).collect();
    let results = crate::par::map_ordered(&leaves, client.effective_parallelism(), |(anc, s)| {
        extract_properties(&doc.rfc_id, anc, s, client, opts)
    });
    for ((_, section), result) in leaves.into_iter().zip(results) {
        file.sections.push(SectionRecord {
            number: section.number.clone(),
            heading: section.heading.clone(),
            body: section.body.clone(),
            status: result.status,
            reason: result.reason,
            property_count: result.properties.len(),
        });
        file.properties.extend(result.properties);
        file.diagnostics.extend(result.diagnostics);
    }
    file.usage = client.meter_since(mark);
    file
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockRule, MockScript, ScriptedBackend};
    use crate::rfc::parse_rfc;
    use std::sync::Arc;

    const BODY: &str =
        "   If the node has only unfeasible routes, it MUST send\n   a seqno request.  Nodes SHOULD log this.\n";

    fn section() -> RfcSection {
        RfcSection {
            number: "3.8.2.1".into(),
            heading: "Avoiding Starvation".into(),
            heading_line: "3.8.2.1.  Avoiding Starvation".into(),
            body: BODY.into(),
            children: vec![],
        }
    }

    fn reply(items: &[(&str, &str, &str)]) -> String {
        let props: Vec<_> = items
            .iter()
            .map(|(s, m, e)| serde_json::json!({"statement": s, "modality": m, "excerpt": e}))
            .collect();
        format!("```json\n{}\n```", serde_json::json!({ "properties": props }))
    }

    fn client(rules: Vec<MockRule>) -> LlmClient {
        LlmClient::new(Arc::new(ScriptedBackend::new(MockScript { rules })))
    }

    #[test]
    fn whitespace_insensitive_excerpt_maps_to_original_bytes() {
        let span = locate_excerpt(BODY, "it MUST send a seqno request.").unwrap();
        assert_eq!(&BODY[span.start..span.end], "it MUST send\n   a seqno request.");
        assert!(locate_excerpt(BODY, "it MUST send a sequence request").is_none());
        assert!(locate_excerpt(BODY, "   ").is_none());
    }

    #[test]
    fn two_properties_get_ordinals() {
        let c = client(vec![MockRule::any(reply(&[
            (
                "send seqno request when starving",
                "MUST",
                "it MUST send a seqno request.",
            ),
            (
                "only unfeasible routes trigger it",
                "REQUIRED",
                "If the node has only unfeasible routes",
            ),
        ]))]);
        let out = extract_properties("RFC 8966", &[], &section(), &c, &ExtractOptions::default());
        let ids: Vec<_> = out.properties.iter().map(|p| p.property_id.as_str()).collect();
        assert_eq!(ids, vec!["RFC8966:3.8.2.1:1", "RFC8966:3.8.2.1:2"]);
        for p in &out.properties {
            assert!(BODY.contains(&p.source_excerpt));
        }
        assert_eq!(c.call_count(), 1);
    }

    #[test]
    fn non_verbatim_reply_is_retried_then_dropped() {
        let bad = reply(&[("x", "MUST", "nodes must always send requests")]);
        let c = client(vec![MockRule::any(bad)]);
        let out = extract_properties("RFC 8966", &[], &section(), &c, &ExtractOptions::default());
        assert!(out.properties.is_empty());
        assert_eq!(c.call_count(), 2);
        assert!(out.diagnostics.iter().any(|d| d.contains("rejected non-verbatim")));
        assert!(out.diagnostics.iter().any(|d| d.contains("dropped property")));
    }

    #[test]
    fn retry_recovers_a_verbatim_reply() {
        let c = client(vec![
            MockRule::any(reply(&[("x", "MUST", "paraphrase")])).once(),
            MockRule::any(reply(&[("x", "MUST", "it MUST send")])),
        ]);
        let out = extract_properties("RFC 8966", &[], &section(), &c, &ExtractOptions::default());
        assert_eq!(out.properties.len(), 1);
        assert_eq!(out.properties[0].source_excerpt, "it MUST send");
    }

    #[test]
    fn advisory_and_prose_sections() {
        let c = client(vec![MockRule::any(reply(&[(
            "log",
            "SHOULD",
            "Nodes SHOULD log this.",
        )]))]);
        let out = extract_properties("RFC 8966", &[], &section(), &c, &ExtractOptions::default());
        assert!(out.properties.is_empty());

        let prose = RfcSection {
            body: "This section is descriptive only.\n".into(),
            ..section()
        };
        let out = extract_properties("RFC 8966", &[], &prose, &c, &ExtractOptions::default());
        assert_eq!(out.status, SectionStatus::Skipped);
        assert_eq!(c.call_count(), 1);
    }

    #[test]
    fn malformed_twice_marks_unprocessed() {
        let c = client(vec![MockRule::any("I think it MUST do things.")]);
        let out = extract_properties("RFC 8966", &[], &section(), &c, &ExtractOptions::default());
        assert_eq!(out.status, SectionStatus::Unprocessed);
        assert_eq!(c.call_count(), 2);
    }

    #[test]
    fn modality_parsing() {
        assert_eq!(Modality::parse("must not"), Some(Modality::MustNot));
        assert_eq!(Modality::parse("SHALL_NOT"), Some(Modality::MustNot));
        assert_eq!(Modality::parse("REQUIRED"), Some(Modality::Required));
        assert_eq!(Modality::parse("SHOULD"), None);
        assert_eq!(Modality::parse("MAY"), None);
    }

    #[test]
    fn properties_file_round_trip_and_checks() {
        let doc = parse_rfc("1. Intro\nA node MUST reply.\n2. Other\nNothing here.\n");
        let c = client(vec![MockRule::any(reply(&[("reply", "MUST", "A node MUST reply.")]))]);
        let file = extract_all(&doc, &c, &ExtractOptions::default());
        assert_eq!(file.properties.len(), 1);
        assert_eq!(file.sections[1].status, SectionStatus::Skipped);
        let back = PropertiesFile::from_json_bytes(file.to_json().as_bytes()).unwrap();
        assert_eq!(back, file);

        let mut tampered = file.clone();
        tampered.properties[0].source_excerpt = "A node MUST NOT reply.".into();
        assert!(PropertiesFile::from_json_bytes(tampered.to_json().as_bytes()).is_err());
        let mut bumped = file;
        bumped.version = 2;
        assert!(matches!(
            PropertiesFile::from_json_bytes(bumped.to_json().as_bytes()),
            Err(RfcError::Version { found: 2, .. })
        ));
    }
}
