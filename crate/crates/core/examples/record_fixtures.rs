//! Re-records the cassettes of the seeded fixture from its mock script.
//!
//!     cargo run -p rfc-audit-core --example record_fixtures [fixture-dir]
//!
//! The default fixture directory is `fixtures/seeded` at the workspace root.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rfc_audit::agent::{run_audit, AgentConfig, NavTree};
use rfc_audit::code::{scan_repository, ScanOptions};
use rfc_audit::index::{build_index, IndexOptions};
use rfc_audit::llm::{LlmClient, MockScript, RecordBackend, ScriptedBackend};
use rfc_audit::rfc::{extract_all, parse_rfc, ExtractOptions};

fn recorder(script: &MockScript, path: PathBuf) -> LlmClient {
    let inner = Box::new(ScriptedBackend::new(script.clone()));
    LlmClient::new(Arc::new(RecordBackend::new(inner, path)))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/seeded"));
    let script = MockScript::load(&dir.join("mock.json"))?;
    let cassettes = dir.join("cassettes");
    std::fs::create_dir_all(&cassettes)?;

    let model = scan_repository(&dir.join("trpd"), &ScanOptions::default())?;
    let client = recorder(&script, cassettes.join("index.json"));
    let index = build_index(&model, &client, &IndexOptions::default())?.index;
    client.finish()?;
    println!("index: {} calls", client.call_count());

    let text = std::fs::read_to_string(dir.join("spec.txt"))?;
    let doc = parse_rfc(&text);
    let client = recorder(&script, cassettes.join("properties.json"));
    let props = extract_all(&doc, &client, &ExtractOptions::default());
    client.finish()?;
    println!(
        "properties: {} calls, {} properties",
        client.call_count(),
        props.properties.len()
    );

    let client = recorder(&script, cassettes.join("audit.json"));
    let tree = NavTree::from_index(&index, &model);
    let (run, _) = run_audit(
        &doc.rfc_id,
        &props.properties,
        &tree,
        &model,
        &client,
        &AgentConfig::default(),
    );
    client.finish()?;
    println!("audit: {} calls, {} reports", client.call_count(), run.reports.len());
    for p in &run.properties {
        println!("  {} {:?} {:?}", p.property_id, p.status, p.trace);
    }
    Ok(())
}
