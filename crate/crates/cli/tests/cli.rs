use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn pfcycle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfcycle")).args(args).output().expect("spawn pfcycle")
}

fn run_in(dir: &Path, config: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    pfcycle(&all)
}

fn csv(dir: &Path) -> Vec<u8> {
    fs::read(dir.join("trajectories.csv")).unwrap()
}

#[test]
fn same_seed_gives_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig2_c.toml");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert!(run_in(&a, &cfg, &["simulate"]).status.success());
    assert!(run_in(&b, &cfg, &["simulate"]).status.success());
    assert!(run_in(&c, &cfg, &["simulate", "--serial"]).status.success());
    assert_eq!(csv(&a), csv(&b));
    assert_eq!(csv(&a), csv(&c));
}

#[test]
fn seed_override_changes_noisy_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig1_left.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_in(&a, &cfg, &["simulate"]).status.success());
    assert!(run_in(&b, &cfg, &["--seed", "99", "simulate"]).status.success());
    assert_ne!(csv(&a), csv(&b));
}

#[test]
fn csv_header_and_row_count() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &configs().join("fig1_left.toml"), &["--format", "csv", "simulate"]);
    assert!(out.status.success());
    let text = String::from_utf8(csv(tmp.path())).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("run,n,x,controlled"));
    assert_eq!(lines.count(), 5 * 1001);
    assert!(!tmp.path().join("trajectories.svg").exists());
}

#[test]
fn dumped_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig6_a.toml");
    let dump = pfcycle(&["--config", cfg.to_str().unwrap(), "--seed", "7", "--dump-config", "simulate"]);
    assert!(dump.status.success());
    let dumped = tmp.path().join("dumped.toml");
    fs::write(&dumped, &dump.stdout).unwrap();

    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_in(&a, &cfg, &["--seed", "7", "simulate"]).status.success());
    assert!(run_in(&b, &dumped, &["simulate"]).status.success());
    assert_eq!(csv(&a), csv(&b));
}

#[test]
fn design_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &configs().join("ricker_mult_admissible.toml"), &["design"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("design.json")).unwrap()).unwrap();
    assert!(report.to_string().contains("nu"));
}

#[test]
fn verify_passes_on_admissible_configs() {
    for name in ["ricker_mult_admissible.toml", "ricker_add_admissible.toml", "fig4_a.toml"] {
        let tmp = tempfile::tempdir().unwrap();
        let out = run_in(tmp.path(), &configs().join(name), &["verify"]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(tmp.path().join("verify.json").exists());
    }
}

#[test]
fn bifurcate_with_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &configs().join("fig3.toml"),
        &["bifurcate", "--param", "c", "--from", "0.1", "--to", "0.3", "--points", "3"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("bifurcation.csv")).unwrap();
    assert!(text.starts_with("param,x0,sample_index,x"));
}

#[test]
fn target_at_f_of_b_is_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let fb = 1.0 / 2.8 * (2.8f64 - 1.0).exp();
    let text = fs::read_to_string(configs().join("ricker_mult_admissible.toml"))
        .unwrap()
        .replace("x_star = 0.6", &format!("x_star = {fb}"));
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run_in(tmp.path(), &cfg, &["design"]).status.code(), Some(3));
}

#[test]
fn malformed_configs_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    for text in ["[map]\nfamily = \"ricker\"\nbogus = 1\n", "not toml at all ][", ""] {
        fs::write(&cfg, text).unwrap();
        assert_eq!(run_in(tmp.path(), &cfg, &["design"]).status.code(), Some(2), "{text:?}");
    }
    assert_eq!(pfcycle(&["design"]).status.code(), Some(2));
}

#[test]
fn missing_config_exits_with_code_1() {
    let out = pfcycle(&["--config", "/nonexistent/pfcycle.toml", "design"]);
    assert_eq!(out.status.code(), Some(1));
}
