#![no_main]

use libfuzzer_sys::fuzz_target;
use tailcvar::harness::parse_returns_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = parse_returns_csv(data) {
        assert!(m.nrows() > 0 && m.ncols() > 0);
        assert!(m.as_slice().iter().all(|v| v.is_finite()));
    }
});
