#![no_main]

use libfuzzer_sys::fuzz_target;
use rfc_audit::llm::MockScript;

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<MockScript>(data);
});
