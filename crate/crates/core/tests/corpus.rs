use std::fs;
use std::path::Path;

use pfcycle::analysis::SweepParam;
use pfcycle::config::{MapSpec, RunConfig};
use pfcycle::sim::Scheme;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn config_seeds_parse_and_round_trip() {
    for (name, text) in seeds("config_parse") {
        let cfg = RunConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
        if let Err(e) = cfg.resolve() {
            panic!("{name}: {e}");
        }
    }
}

#[test]
fn map_seeds_build() {
    for (name, text) in seeds("map_spec") {
        let spec = MapSpec::from_toml_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        spec.build().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn name_seeds_parse() {
    for (name, text) in seeds("names") {
        let ok = text.parse::<Scheme>().is_ok() || text.parse::<SweepParam>().is_ok();
        assert!(ok, "{name}");
    }
}
