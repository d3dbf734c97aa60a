#![no_main]

use caprouter_cli::CliConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = CliConfig::from_json(text) {
        let _ = cfg.validate();
    }
});
