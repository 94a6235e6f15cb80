#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = rfc_audit::agent::AuditRun::from_json_bytes(data);
});
