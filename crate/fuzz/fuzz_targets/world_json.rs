#![no_main]

use caprouter::simenv::SimWorld;
use libfuzzer_sys::fuzz_target;

// Loading regenerates the world, so huge splits only measure generation time.
const MAX_QUERIES: u64 = 2_000;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(text) {
        let n = |k: &str| v["config"][k].as_u64().unwrap_or(0);
        if n("n_train").saturating_add(n("n_test")) > MAX_QUERIES {
            return;
        }
    }
    if let Ok(world) = SimWorld::from_world_json(text) {
        assert_eq!(world.to_world_json().expect("valid world serializes"), text);
    }
});
