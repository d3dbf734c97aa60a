#![no_main]

use caprouter::simenv::SimQuery;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(q) = SimQuery::parse_line(text) {
        let line = q.to_line().expect("valid query serializes");
        assert_eq!(SimQuery::parse_line(&line).expect("round trip"), q);
    }
});
