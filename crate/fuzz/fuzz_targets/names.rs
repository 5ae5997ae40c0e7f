#![no_main]

use libfuzzer_sys::fuzz_target;
use pfcycle::analysis::SweepParam;
use pfcycle::sim::Scheme;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = text.parse::<Scheme>() {
        assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
    }
    let _ = text.parse::<SweepParam>();
});
