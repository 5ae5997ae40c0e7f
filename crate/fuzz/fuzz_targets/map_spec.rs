#![no_main]

use libfuzzer_sys::fuzz_target;
use pfcycle::config::MapSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = MapSpec::from_toml_str(text) {
        if let Ok(map) = spec.build() {
            let _ = map.eval(0.5);
            let _ = map.default_b();
        }
    }
});
