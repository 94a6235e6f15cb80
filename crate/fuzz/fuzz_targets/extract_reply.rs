#![no_main]

use std::sync::Arc;

use libfuzzer_sys::fuzz_target;
use rfc_audit::llm::{LlmClient, MockScript, ScriptedBackend};
use rfc_audit::rfc::{extract_properties, parse_rfc, ExtractOptions};

const SPEC: &str = "1.  Rules\n\n   A sender MUST set the version to 1. A receiver SHOULD log errors.\n";

fuzz_target!(|data: &[u8]| {
    let reply = String::from_utf8_lossy(data).into_owned();
    let backend = ScriptedBackend::new(MockScript::default()).with_responder(move |_| Some(reply.clone()));
    let client = LlmClient::new(Arc::new(backend));
    let doc = parse_rfc(SPEC);
    let section = &doc.sections[0];
    let out = extract_properties(&doc.rfc_id, &[], section, &client, &ExtractOptions::default());
    for p in out.properties {
        assert!(section.body.contains(&p.source_excerpt));
    }
});
