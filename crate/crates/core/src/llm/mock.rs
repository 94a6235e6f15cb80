use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{estimate_tokens, Backend, BackendKind, ChatRequest, ChatResponse, TokenUsage};
use crate::error::LlmError;

/// One scripted answer. A rule matches when its purpose (if any) equals the
/// request purpose, or is a prefix ending in `.`, and every `contains`
/// needle occurs in the prompt text. Rules with `times` retire after that
/// many uses, which lets a script answer the same question differently on
/// successive turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<usize>,
}

impl MockRule {
    pub fn any(response: impl Into<String>) -> Self {
        MockRule {
            purpose: None,
            contains: Vec::new(),
            response: response.into(),
            times: None,
        }
    }

    pub fn for_purpose(purpose: impl Into<String>, response: impl Into<String>) -> Self {
        MockRule {
            purpose: Some(purpose.into()),
            ..MockRule::any(response)
        }
    }

    pub fn containing(mut self, needle: impl Into<String>) -> Self {
        self.contains.push(needle.into());
        self
    }

    pub fn once(mut self) -> Self {
        self.times = Some(1);
        self
    }

    fn matches(&self, req: &ChatRequest, prompt: &str) -> bool {
        let purpose_ok = match &self.purpose {
            None => true,
            Some(p) if p.ends_with('.') => req.purpose.starts_with(p.as_str()),
            Some(p) => req.purpose == *p,
        };
        purpose_ok && self.contains.iter().all(|n| prompt.contains(n.as_str()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let bytes = std::fs::read(path).map_err(|e| LlmError::Mock(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| LlmError::Mock(format!("{}: {e}", path.display())))
    }
}

type Responder = Box<dyn Fn(&ChatRequest) -> Option<String> + Send + Sync>;

/// Deterministic scripted backend. Token usage is estimated from text
/// length; latency is zero.
pub struct ScriptedBackend {
    rules: Vec<MockRule>,
    used: Mutex<Vec<usize>>,
    responder: Option<Responder>,
}

impl ScriptedBackend {
    pub fn new(script: MockScript) -> Self {
        let n = script.rules.len();
        ScriptedBackend {
            rules: script.rules,
            used: Mutex::new(vec![0; n]),
            responder: None,
        }
    }

    /// Consulted before the rules; `None` falls through to them.
    pub fn with_responder(mut self, f: impl Fn(&ChatRequest) -> Option<String> + Send + Sync + 'static) -> Self {
        self.responder = Some(Box::new(f));
        self
    }

    fn answer(&self, req: &ChatRequest) -> Option<String> {
        if let Some(r) = &self.responder {
            if let Some(text) = r(req) {
                return Some(text);
            }
        }
        let prompt = req.prompt_text();
        let mut used = self.used.lock().expect("mock state poisoned");
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.times.is_some_and(|t| used[i] >= t) {
                continue;
            }
            if rule.matches(req, &prompt) {
                used[i] += 1;
                return Some(rule.response.clone());
            }
        }
        None
    }
}

impl Backend for ScriptedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let content = self
            .answer(request)
            .ok_or_else(|| LlmError::Mock(format!("no scripted response for purpose {:?}", request.purpose)))?;
        Ok(ChatResponse {
            usage: TokenUsage {
                input_tokens: estimate_tokens(&request.prompt_text()),
                output_tokens: estimate_tokens(&content),
            },
            content,
            latency_ms: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_match_in_order_and_retire() {
        let b = ScriptedBackend::new(MockScript {
            rules: vec![
                MockRule::for_purpose("agent.detect", "first")
                    .containing("route_lost")
                    .once(),
                MockRule::for_purpose("agent.", "second"),
            ],
        });
        let req = ChatRequest::new("agent.detect", "m", "s", "look at route_lost");
        assert_eq!(b.complete(&req).unwrap().content, "first");
        assert_eq!(b.complete(&req).unwrap().content, "second");
        let other = ChatRequest::new("index.function", "m", "s", "x");
        assert!(matches!(b.complete(&other), Err(LlmError::Mock(_))));
    }

    #[test]
    fn echoes_fixed_verdict_verbatim() {
        let verdict = "```json\n{\"decision\":\"conformant\",\"explanation\":\"ok\"}\n```";
        let b = ScriptedBackend::new(MockScript {
            rules: vec![MockRule::any(verdict)],
        });
        let r = b.complete(&ChatRequest::new("p", "m", "s", "u")).unwrap();
        assert_eq!(r.content, verdict);
        assert!(r.usage.input_tokens > 0);
    }
}
