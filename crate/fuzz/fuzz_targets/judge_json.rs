#![no_main]

use caprouter::supervision::parse_judge_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = parse_judge_json(text) {
        // accepted replies re-serialize into replies that parse to the same assessment
        let again = parse_judge_json(&parsed.assessment.to_judge_json()).expect("re-serialized reply parses");
        assert_eq!(again.assessment, parsed.assessment);
    }
});
