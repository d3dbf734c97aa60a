#![no_main]

use caprouter::training::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ckpt) = Checkpoint::from_json(text) {
        let json = ckpt.to_json().expect("valid checkpoint serializes");
        assert_eq!(Checkpoint::from_json(&json).expect("round trip"), ckpt);
    }
});
