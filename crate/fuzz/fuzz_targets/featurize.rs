#![no_main]

use caprouter::model::{featurize, FeaturizerConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let cfg = FeaturizerConfig { d_feat: 257, ..FeaturizerConfig::default() };
    if let Ok(x) = featurize(&cfg, text) {
        assert!(x.entries().iter().all(|&(i, v)| i < cfg.d_feat && v.is_finite() && v > 0.0));
    }
});
