#![no_main]

use libfuzzer_sys::fuzz_target;
use rfc_audit::rfc::parse_rfc;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let doc = parse_rfc(&text);
    for (ancestors, s) in doc.walk() {
        if let Some(parent) = ancestors.last() {
            assert!(s.number.starts_with(&format!("{}.", parent.number)));
        }
    }
});
