#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = rfc_audit::llm::Cassette::from_json_bytes(data);
});
