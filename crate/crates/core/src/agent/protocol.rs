//! Structured reply protocol: every model decision arrives as one fenced
//! JSON block that is parsed and schema-checked here.

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Returns the body of the last fenced code block that looks like JSON, or
/// the whole reply if it is a bare JSON object.
pub fn extract_json_block(text: &str) -> Option<&str> {
    let mut found: Option<&str> = None;
    let mut rest = text;
    let mut offset = 0;
    while let Some(open) = rest.find("```") {
        let after_ticks = &rest[open + 3..];
        let line_end = after_ticks.find('\n')?;
        let lang = after_ticks[..line_end].trim();
        let body_start = open + 3 + line_end + 1;
        let Some(close) = rest[body_start..].find("```") else {
            break;
        };
        let body = &rest[body_start..body_start + close];
        if lang.is_empty() || lang.eq_ignore_ascii_case("json") {
            let trimmed = body.trim();
            if trimmed.starts_with('{') {
                found = Some(&text[offset + body_start..offset + body_start + close]);
            }
        }
        let consumed = body_start + close + 3;
        offset += consumed;
        rest = &rest[consumed..];
    }
    if found.is_none() {
        let t = text.trim();
        if t.starts_with('{') && t.ends_with('}') {
            return Some(t);
        }
    }
    found.map(str::trim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    Query,
    QueryCallee,
    QueryCaller,
}

impl ToolKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ToolKind::Query => "query",
            ToolKind::QueryCallee => "query_callee",
            ToolKind::QueryCaller => "query_caller",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "query" => Some(ToolKind::Query),
            "query_callee" | "callee" => Some(ToolKind::QueryCallee),
            "query_caller" | "caller" => Some(ToolKind::QueryCaller),
            _ => None,
        }
    }
}

/// A retrieval request. The argument shape is fixed by the kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "tool", rename_all = "snake_case")]
pub enum ToolInvocation {
    /// Definition of a type, macro (or function) by name.
    Query { name: String },
    /// Definition of the function called from `caller` at a call to
    /// `callee`, optionally pinned to a 1-based line.
    QueryCallee {
        caller: String,
        callee: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        line: Option<usize>,
    },
    /// All callers of `function`, optionally restricted to one file.
    QueryCaller {
        function: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
    },
}

impl ToolInvocation {
    pub fn kind(&self) -> ToolKind {
        match self {
            ToolInvocation::Query { .. } => ToolKind::Query,
            ToolInvocation::QueryCallee { .. } => ToolKind::QueryCallee,
            ToolInvocation::QueryCaller { .. } => ToolKind::QueryCaller,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ToolInvocation::Query { name } => format!("query({name})"),
            ToolInvocation::QueryCallee { caller, callee, line } => match line {
                Some(l) => format!("query_callee({caller} -> {callee} @ line {l})"),
                None => format!("query_callee({caller} -> {callee})"),
            },
            ToolInvocation::QueryCaller { function, path } => match path {
                Some(p) => format!("query_caller({p}:{function})"),
                None => format!("query_caller({function})"),
            },
        }
    }

    fn from_value(v: &Value) -> Result<Self, String> {
        let obj = v.as_object().ok_or("tool call must be an object")?;
        let kind = obj
            .get("tool")
            .and_then(Value::as_str)
            .and_then(ToolKind::parse)
            .ok_or("tool call needs \"tool\": query | query_callee | query_caller")?;
        let text = |k: &str| -> Result<String, String> {
            obj.get(k)
                .and_then(Value::as_str)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .ok_or_else(|| format!("{} needs a non-empty \"{k}\"", kind.as_str()))
        };
        Ok(match kind {
            ToolKind::Query => ToolInvocation::Query { name: text("name")? },
            ToolKind::QueryCallee => ToolInvocation::QueryCallee {
                caller: text("caller")?,
                callee: text("callee")?,
                line: obj.get("line").and_then(Value::as_u64).map(|l| l as usize),
            },
            ToolKind::QueryCaller => ToolInvocation::QueryCaller {
                function: text("function")?,
                path: obj.get("path").and_then(Value::as_str).map(str::to_string),
            },
        })
    }
}

/// A function the model cites as containing a deviation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub function: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// 1-based inclusive line range inside the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lines: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DetectionReply {
    BugCandidate {
        explanation: String,
        implicated: Vec<Citation>,
    },
    Conformant {
        explanation: String,
    },
    Insufficient {
        explanation: String,
        requests: Vec<ToolInvocation>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdditionalFinding {
    pub explanation: String,
    pub implicated: Vec<Citation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReply {
    pub confirmed: bool,
    pub rationale: String,
    pub additional: Vec<AdditionalFinding>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalizationReply {
    pub selected: Vec<String>,
    pub reason: String,
}

fn block_object(text: &str) -> Result<serde_json::Map<String, Value>, String> {
    let json = extract_json_block(text).ok_or("reply has no fenced JSON block")?;
    match serde_json::from_str::<Value>(json) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err("JSON block is not an object".into()),
        Err(e) => Err(format!("JSON block does not parse: {e}")),
    }
}

fn str_field(obj: &serde_json::Map<String, Value>, key: &str) -> String {
    obj.get(key)
        .and_then(Value::as_str)
        .unwrap_or_default()
        .trim()
        .to_string()
}

fn citations(v: Option<&Value>) -> Result<Vec<Citation>, String> {
    let Some(v) = v else {
        return Ok(Vec::new());
    };
    let arr = v.as_array().ok_or("\"implicated\" must be a list")?;
    arr.iter()
        .map(|c| match c {
            Value::String(s) => Ok(Citation {
                function: s.trim().to_string(),
                path: None,
                lines: None,
            }),
            Value::Object(o) => {
                let function = o
                    .get("function")
                    .and_then(Value::as_str)
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .ok_or("each implicated entry needs \"function\"")?;
                let lines = match o.get("lines").and_then(Value::as_array) {
                    Some(l) if l.len() == 2 => match (l[0].as_u64(), l[1].as_u64()) {
                        (Some(a), Some(b)) if a >= 1 && a <= b => Some((a as usize, b as usize)),
                        _ => None,
                    },
                    _ => None,
                };
                Ok(Citation {
                    function: function.to_string(),
                    path: o.get("path").and_then(Value::as_str).map(str::to_string),
                    lines,
                })
            }
            _ => Err("implicated entries must be objects".to_string()),
        })
        .collect()
}

pub fn parse_detection(text: &str) -> Result<DetectionReply, String> {
    let obj = block_object(text)?;
    let explanation = str_field(&obj, "explanation");
    let decision = obj
        .get("decision")
        .and_then(Value::as_str)
        .ok_or("missing \"decision\"")?
        .trim()
        .to_ascii_lowercase();
    match decision.as_str() {
        "violation" | "bug" | "bug-candidate" | "bug_candidate" => {
            let implicated = citations(obj.get("implicated"))?;
            if implicated.is_empty() {
                return Err("a violation must cite at least one function in \"implicated\"".into());
            }
            Ok(DetectionReply::BugCandidate {
                explanation,
                implicated,
            })
        }
        "conformant" | "consistent" => Ok(DetectionReply::Conformant { explanation }),
        "insufficient" | "need_more_context" => {
            let tools = obj
                .get("tools")
                .and_then(Value::as_array)
                .ok_or("\"insufficient\" needs a \"tools\" list")?;
            let requests = tools
                .iter()
                .map(ToolInvocation::from_value)
                .collect::<Result<Vec<_>, _>>()?;
            if requests.is_empty() {
                return Err("\"insufficient\" needs at least one tool call".into());
            }
            Ok(DetectionReply::Insufficient { explanation, requests })
        }
        other => Err(format!("unknown decision {other:?}")),
    }
}

pub fn parse_validation(text: &str) -> Result<ValidationReply, String> {
    let obj = block_object(text)?;
    let confirmed = obj
        .get("confirmed")
        .and_then(Value::as_bool)
        .ok_or("missing boolean \"confirmed\"")?;
    let additional = match obj.get("additional") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| {
                let o = i.as_object().ok_or("additional findings must be objects")?;
                let implicated = citations(o.get("implicated"))?;
                if implicated.is_empty() {
                    return Err("additional findings must cite functions".to_string());
                }
                Ok(AdditionalFinding {
                    explanation: str_field(o, "explanation"),
                    implicated,
                })
            })
            .collect::<Result<Vec<_>, String>>()?,
        Some(_) => return Err("\"additional\" must be a list".into()),
    };
    Ok(ValidationReply {
        confirmed,
        rationale: str_field(&obj, "rationale"),
        additional,
    })
}

pub fn parse_localization(text: &str) -> Result<LocalizationReply, String> {
    let obj = block_object(text)?;
    let selected = obj
        .get("selected")
        .and_then(Value::as_array)
        .ok_or("missing \"selected\" list")?
        .iter()
        .map(|v| {
            v.as_str()
                .map(|s| s.trim().to_string())
                .ok_or("selected entries must be strings")
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LocalizationReply {
        selected,
        reason: str_field(&obj, "reason"),
    })
}

/// Tool descriptions shown to the model and attached to detection requests.
pub fn tool_specs(enabled: &[ToolKind]) -> Vec<crate::llm::ToolSpec> {
    use serde_json::json;
    enabled
        .iter()
        .map(|k| match k {
            ToolKind::Query => crate::llm::ToolSpec {
                name: "query".into(),
                description: "Retrieve the definition of a data structure, typedef or macro by name.".into(),
                parameters: json!({"type": "object", "properties": {"name": {"type": "string"}}, "required": ["name"]}),
            },
            ToolKind::QueryCallee => crate::llm::ToolSpec {
                name: "query_callee".into(),
                description: "Retrieve the definition of the function called at a call site, given the calling function and the called name (optionally the line).".into(),
                parameters: json!({"type": "object", "properties": {"caller": {"type": "string"}, "callee": {"type": "string"}, "line": {"type": "integer"}}, "required": ["caller", "callee"]}),
            },
            ToolKind::QueryCaller => crate::llm::ToolSpec {
                name: "query_caller".into(),
                description: "Retrieve every function that calls the given function.".into(),
                parameters: json!({"type": "object", "properties": {"function": {"type": "string"}, "path": {"type": "string"}}, "required": ["function"]}),
            },
        })
        .collect()
}
