#![no_main]

use libfuzzer_sys::fuzz_target;
use rfc_audit::code::CodebaseModel;

fuzz_target!(|data: &[u8]| {
    let Ok(m) = CodebaseModel::from_sources("fuzz", vec![("src/a.c", data.to_vec())]) else {
        return;
    };
    for f in m.functions() {
        let bytes = m.file_bytes(&f.path).expect("file of a function");
        assert!(f.body_span.end <= bytes.len());
        assert_eq!(&bytes[f.body_span.start..f.body_span.end], f.body_text.as_bytes());
    }
    for c in m.calls() {
        let callees = m.resolve_callees(c.id).expect("call site resolves");
        for f in callees.functions() {
            let back = m.resolve_callers(&f.id).expect("callee resolves");
            assert!(back.iter().any(|(_, s)| s.id == c.id));
        }
    }
});
