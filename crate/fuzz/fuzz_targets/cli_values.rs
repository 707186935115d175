#![no_main]

use libfuzzer_sys::fuzz_target;
use tailcvar::harness::ThetaSpec;
use tailcvar::{LossModel, Method};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(loss) = LossModel::parse(s) {
        assert_eq!(LossModel::parse(&loss.to_string()).unwrap(), loss);
    }
    let _ = ThetaSpec::parse(s);
    let _ = Method::parse(s);
});
