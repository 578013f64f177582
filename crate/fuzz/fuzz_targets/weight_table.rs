#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(w) = decaybound::WeightSpec::parse_table(text) {
            let (lo, hi) = w.domain();
            let _ = w.eval((lo + hi) / 2.0);
        }
    }
});
