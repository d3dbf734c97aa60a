#![no_main]

use caprouter::supervision::SupervisionRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rec) = SupervisionRecord::parse_line(text) {
        let line = rec.to_line().expect("valid record serializes");
        assert_eq!(SupervisionRecord::parse_line(&line).expect("round trip"), rec);
    }
});
