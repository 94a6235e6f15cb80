#![no_main]

use libfuzzer_sys::fuzz_target;
use rfc_audit::agent::protocol::{parse_detection, parse_localization, parse_validation};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = parse_detection(&text);
    let _ = parse_validation(&text);
    let _ = parse_localization(&text);
});
