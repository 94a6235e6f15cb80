#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rfc_audit::agent::{run_audit, AgentConfig, AuditRun, NavTree, PropertyOutcome};
use rfc_audit::code::{scan_repository, CodebaseModel, ScanOptions};
use rfc_audit::index::{build_index, IndexOptions, SemanticIndex};
use rfc_audit::llm::{Cassette, LlmClient, MockRule, MockScript, ReplayBackend, ScriptedBackend};
use rfc_audit::rfc::{extract_all, parse_rfc, ExtractOptions, PropertiesFile, RfcDocument};

pub fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel)
}

pub fn seeded(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/seeded")
        .join(rel)
}

pub const CALLGRAPH_FIXTURES: [&str; 3] = ["alpha", "beta", "gamma"];

pub fn scan(root: &Path) -> CodebaseModel {
    scan_repository(root, &ScanOptions::default()).expect("fixture scans")
}

/// A mock that answers every request with the same text.
pub fn constant_client(text: &str) -> LlmClient {
    let script = MockScript {
        rules: vec![MockRule::any(text)],
    };
    LlmClient::new(Arc::new(ScriptedBackend::new(script)))
}

pub fn replay_client(cassette: &str) -> LlmClient {
    let c = Cassette::load(&seeded(&format!("cassettes/{cassette}"))).expect("cassette loads");
    LlmClient::new(Arc::new(ReplayBackend::new(c)))
}

pub fn mock_client() -> LlmClient {
    let script = MockScript::load(&seeded("mock.json")).expect("mock script loads");
    LlmClient::new(Arc::new(ScriptedBackend::new(script)))
}

/// Index, properties and model of the seeded fixture, all from replay.
pub struct Seeded {
    pub model: CodebaseModel,
    pub index: SemanticIndex,
    pub doc: RfcDocument,
    pub props: PropertiesFile,
}

pub fn seeded_inputs() -> Seeded {
    let model = scan(&seeded("trpd"));
    let client = replay_client("index.json");
    let index = build_index(&model, &client, &IndexOptions::default())
        .expect("index replays")
        .index;
    let text = std::fs::read_to_string(seeded("spec.txt")).expect("spec readable");
    let doc = parse_rfc(&text);
    let client = replay_client("properties.json");
    let props = extract_all(&doc, &client, &ExtractOptions::default());
    Seeded {
        model,
        index,
        doc,
        props,
    }
}

pub fn seeded_audit(s: &Seeded, config: &AgentConfig, client: &LlmClient) -> (AuditRun, Vec<PropertyOutcome>) {
    let tree = if config.ablation.no_semantic_index {
        NavTree::from_model(&s.model)
    } else {
        NavTree::from_index(&s.index, &s.model)
    };
    let (mut run, outcomes) = run_audit(&s.doc.rfc_id, &s.props.properties, &tree, &s.model, client, config);
    run.set_upstream_usage(Some(s.index.usage), Some(s.props.usage));
    (run, outcomes)
}

/// Copies a directory tree.
pub fn copy_tree(from: &Path, to: &Path) {
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry.expect("walk");
        let rel = entry.path().strip_prefix(from).expect("prefix");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).expect("mkdir");
        } else {
            std::fs::copy(entry.path(), &dest).expect("copy");
        }
    }
}

/// The seeded mock script with `first` consulted before its own rules.
pub fn mock_client_with(first: Vec<MockRule>) -> LlmClient {
    let mut script = MockScript::load(&seeded("mock.json")).expect("mock script loads");
    script.rules.splice(0..0, first);
    LlmClient::new(Arc::new(ScriptedBackend::new(script)))
}

pub fn only_property(s: &Seeded, id: &str) -> Vec<rfc_audit::rfc::SemanticProperty> {
    s.props
        .properties
        .iter()
        .filter(|p| p.property_id == id)
        .cloned()
        .collect()
}
