#![no_main]

use libfuzzer_sys::fuzz_target;
use tailcvar::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_json_str(s) {
        // an accepted config survives its own serialization
        let json = serde_json::to_string(&cfg).unwrap();
        ExperimentConfig::from_json_str(&json).unwrap();
    }
});
