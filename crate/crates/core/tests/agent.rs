mod common;

use std::sync::Arc;

use rfc_audit::agent::{
    is_legal_trace, AgentConfig, DetectionState::*, PropertyOutcome, PropertyStatus, ToolKind, TranscriptEvent,
};
use rfc_audit::llm::{Cassette, LlmClient, MockRule, ReplayBackend};

use common::*;

fn detect(pid: &str, response: &str) -> MockRule {
    MockRule::for_purpose("agent.detect", response).containing(format!("({pid},"))
}

fn validate(pid: &str, response: &str) -> MockRule {
    MockRule::for_purpose("agent.validate", response).containing(format!("({pid},"))
}

fn audit_one(pid: &str, config: &AgentConfig, client: &LlmClient) -> PropertyOutcome {
    let mut s = seeded_inputs();
    s.props.properties = only_property(&s, pid);
    let (_, mut outcomes) = seeded_audit(&s, config, client);
    assert_eq!(outcomes.len(), 1);
    let o = outcomes.remove(0);
    assert!(
        is_legal_trace(&o.trace, !config.ablation.no_validation),
        "{:?}",
        o.trace
    );
    o
}

fn json(body: &str) -> String {
    format!("```json\n{body}\n```")
}

#[test]
fn malformed_detection_reply_is_inconclusive() {
    let client = mock_client_with(vec![detect("RFC9999:2.1:1", "I think it is fine.")]);
    let o = audit_one("RFC9999:2.1:1", &AgentConfig::default(), &client);
    assert_eq!(o.status, PropertyStatus::Inconclusive);
    assert_eq!(o.reason.as_deref(), Some("malformed model output"));
    assert_eq!(o.trace, vec![Localization, Detection, ConcludedInconclusive]);
}

#[test]
fn unusable_review_keeps_candidate_unvalidated() {
    let client = mock_client_with(vec![validate("RFC9999:2.2:1", "no opinion")]);
    let o = audit_one("RFC9999:2.2:1", &AgentConfig::default(), &client);
    assert_eq!(o.status, PropertyStatus::Violation);
    assert_eq!(o.unvalidated, 1);
    assert!(o.verdicts.iter().all(|v| !v.validated));
}

#[test]
fn citation_outside_gathered_code_is_retried() {
    let bogus = json(
        r#"{"decision": "violation", "explanation": "x", "implicated": [{"function": "no_such_fn", "path": "src/nowhere.c"}]}"#,
    );
    let client = mock_client_with(vec![detect("RFC9999:2.2:1", &bogus).once()]);
    let o = audit_one("RFC9999:2.2:1", &AgentConfig::default(), &client);
    assert_eq!(o.status, PropertyStatus::Violation);
    assert_eq!(o.verdicts[0].implicated[0].function, "validate_entry");
    let transcript = serde_json::to_string(&o.transcript).unwrap();
    assert!(transcript.contains("none of the implicated functions"));
}

#[test]
fn refuted_candidate_with_additional_finding_still_reports() {
    let review = json(
        r#"{"confirmed": false, "rationale": "metric 0 is filtered later", "additional": [{"explanation": "route_update trusts the metric", "implicated": [{"function": "validate_entry"}]}]}"#,
    );
    let client = mock_client_with(vec![validate("RFC9999:2.2:1", &review)]);
    let o = audit_one("RFC9999:2.2:1", &AgentConfig::default(), &client);
    assert_eq!(o.status, PropertyStatus::Violation);
    assert_eq!(o.verdicts.len(), 1);
    assert!(o.verdicts[0].from_review && o.verdicts[0].validated);
}

#[test]
fn disabled_tool_is_refused_without_executing() {
    let mut config = AgentConfig::default();
    config.ablation.disabled_tools.insert(ToolKind::Query);
    let o = audit_one("RFC9999:3.3:1", &config, &mock_client());
    assert_eq!(o.tool_executions, 0);
    let refused = o.transcript.iter().any(|e| {
        matches!(e, TranscriptEvent::Tool { observation, added, .. }
            if observation == "error: tool query is disabled" && added.is_empty())
    });
    assert!(refused);
}

#[test]
fn token_budget_ends_property() {
    let config = AgentConfig {
        token_budget: 1,
        ..AgentConfig::default()
    };
    let o = audit_one("RFC9999:2.2:1", &config, &mock_client());
    assert_eq!(o.status, PropertyStatus::Inconclusive);
    assert_eq!(o.reason.as_deref(), Some("token budget exhausted"));
    assert_eq!(o.trace.last(), Some(&ConcludedInconclusive));
    assert!(!o.trace.contains(&Validation));
}

#[test]
fn backend_failure_marks_every_property_failed() {
    let s = seeded_inputs();
    let client = LlmClient::new(Arc::new(ReplayBackend::new(Cassette::default())));
    let (run, outcomes) = seeded_audit(&s, &AgentConfig::default(), &client);
    assert_eq!(run.count(PropertyStatus::Failed), s.props.properties.len());
    assert!(run.reports.is_empty());
    for o in &outcomes {
        assert!(o.verdicts.is_empty());
        assert_eq!(o.trace.last(), Some(&ConcludedInconclusive));
    }
}

#[test]
fn no_validation_concludes_directly() {
    let mut config = AgentConfig::default();
    config.ablation.no_validation = true;
    let o = audit_one("RFC9999:3.4:1", &config, &mock_client());
    assert_eq!(o.trace, vec![Localization, Detection, ConcludedViolation]);
    assert!(!is_legal_trace(&o.trace, true));
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let s = seeded_inputs();
    let config = AgentConfig::default();
    let (a, _) = seeded_audit(&s, &config, &mock_client().with_parallelism(1));
    let (b, _) = seeded_audit(&s, &config, &mock_client().with_parallelism(8));
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn every_seeded_trace_is_legal() {
    let s = seeded_inputs();
    for no_validation in [false, true] {
        let mut config = AgentConfig::default();
        config.ablation.no_validation = no_validation;
        let (_, outcomes) = seeded_audit(&s, &config, &mock_client());
        for o in outcomes {
            assert!(is_legal_trace(&o.trace, !no_validation), "{:?}", o.trace);
        }
    }
}
