#![no_main]

use libfuzzer_sys::fuzz_target;
use owen_core::synthesis::DecaySchedule;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = text.parse::<DecaySchedule>() {
        let again: DecaySchedule = s.to_string().parse().expect("displayed schedule parses");
        assert_eq!(again.stages(), s.stages());
        for step in [0, 1, 500, u64::MAX] {
            let _ = s.lookup(step);
        }
    }
});
