#![no_main]

use caprouter::eval::EvalReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = EvalReport::from_json(text) {
        report.validate().expect("parsed reports are valid");
        let json = report.to_json().expect("valid report serializes");
        assert_eq!(EvalReport::from_json(&json).expect("round trip"), report);
    }
});
