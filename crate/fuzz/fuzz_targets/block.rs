#![no_main]

use libfuzzer_sys::fuzz_target;
use owen_core::format::parse_block;

fuzz_target!(|data: &[u8]| {
    let Some((&rank, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let rank = usize::from(rank % 8);
    if let Ok(block) = parse_block(text, rank) {
        assert_eq!(block.len(), rank);
        assert!(block.iter().all(|&b| b > 0));
    }
});
