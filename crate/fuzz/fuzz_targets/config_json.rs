#![no_main]
use libfuzzer_sys::fuzz_target;

// Config parsing and validation must reject arbitrary input gracefully:
// no panics, no unchecked arithmetic on hostile numerics. Accepted
// configs must also survive the derived constructions.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = regime_impact::config::Config::from_json_str(text) {
            let params = config.model_params().expect("validated config builds params");
            let _ = params.coefficient_warnings();
            let _ = config.to_json_pretty();
        }
    }
});
