#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = rfc_audit::index::SemanticIndex::from_json_bytes(data);
});
