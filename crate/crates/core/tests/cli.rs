use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plap-lab"))
}

fn shipped(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "configs", name].iter().collect()
}

fn run(args: &[&str], config: &Path, out: &Path) -> i32 {
    let status = bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", "1"])
        .status()
        .unwrap();
    status.code().unwrap()
}

#[test]
fn solve_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = shipped("ground_state.json");
    assert_eq!(run(&["solve"], &cfg, &a), 0);
    assert_eq!(run(&["solve"], &cfg, &b), 0);
    for f in ["report.json", "solution.csv", "manifest.json"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let (x, y) = (std::fs::read(a.join("solution.csv")).unwrap(), std::fs::read(b.join("solution.csv")).unwrap());
    assert_eq!(x, y, "same config and seed must give identical CSV");
}

#[test]
fn eigen_and_experiment_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["eigen"], &shipped("second_solution.json"), &dir.path().join("e")), 0);
    assert!(dir.path().join("e/phi1.csv").exists());
    let out = dir.path().join("d");
    assert_eq!(run(&["deadcore-check"], &shipped("deadcore_check.json"), &out), 0);
    assert!(out.join("report.json").exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(shipped("ground_state.json")).unwrap().replace("\"q\": 1.5", "\"q\": 2.5");
    std::fs::write(&bad, text).unwrap();
    assert_eq!(run(&["solve"], &bad, &dir.path().join("o")), 2);
    // wrong driver for the subcommand
    assert_eq!(run(&["sweep-q"], &shipped("blowup.json"), &dir.path().join("o")), 2);
    assert_eq!(run(&["solve"], &dir.path().join("missing.json"), &dir.path().join("o")), 2);
}
