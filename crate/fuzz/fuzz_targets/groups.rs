#![no_main]

use libfuzzer_sys::fuzz_target;
use owen_core::oracle::{parse_groups, validate_partition};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(groups) = parse_groups(text) {
        let n = groups.iter().map(Vec::len).sum();
        let _ = validate_partition(&groups, n);
    }
});
