#![no_main]
use libfuzzer_sys::fuzz_target;

use regime_impact::config::PolicySpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(PolicySpec::Flat(h)) = PolicySpec::parse(text) {
            // Accepted flat positions are always finite.
            assert!(h.is_finite());
        }
    }
});
