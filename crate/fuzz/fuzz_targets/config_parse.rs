#![no_main]

use libfuzzer_sys::fuzz_target;
use pfcycle::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml_str(text) {
        // Resolving runs the design, so keep the chain short.
        if cfg.system.k <= 8 {
            let _ = cfg.resolve();
        }
        let _ = cfg.to_toml_string();
    }
});
