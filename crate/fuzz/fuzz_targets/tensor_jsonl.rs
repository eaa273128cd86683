#![no_main]

use libfuzzer_sys::fuzz_target;
use owen_core::format::{decode_jsonl, encode_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = decode_jsonl(text) {
        let again = decode_jsonl(&encode_jsonl(&t)).expect("re-encoded tensor decodes");
        assert_eq!(again, t);
    }
});
