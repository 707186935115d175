#![no_main]

use libfuzzer_sys::fuzz_target;
use tailcvar::harness::parse_results_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_results_csv(data);
});
