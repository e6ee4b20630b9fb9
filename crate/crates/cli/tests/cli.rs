use std::path::Path;
use std::process::{Command, Output};

fn chemoscale(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemoscale")).args(args).current_dir(cwd).output().unwrap()
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn check_runs_one_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = chemoscale(&["--check", "6"], dir.path());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.contains("criterion  6 [linfty-bound]: PASS"), "{text}");
    let bad = chemoscale(&["--check", "42"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn fokker_planck_writes_a_store() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fokker_planck.json");
    let out = chemoscale(
        &["fokker-planck", "--config", cfg.to_str().unwrap(), "--out", "fp", "--set", "t_end=0.2", "--set", "n_frames=4"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fp/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["frames"].as_array().unwrap().len(), 5);
    assert!(dir.path().join("fp/series.json").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("simulate.json");
    let out = chemoscale(&["simulate", "--config", cfg.to_str().unwrap(), "--set", "bogus=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    let missing = chemoscale(&["sweep", "--config", "does-not-exist.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn simulate_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("simulate.json");
    let out = chemoscale(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "sim",
            "--set",
            "L=4",
            "--set",
            "gamma=16",
            "--set",
            "M0=1600",
            "--set",
            "grid.n_core=64",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sim/run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().contains(",ok"));
    assert!(dir.path().join("sim/coupled/manifest.json").exists());
    assert!(dir.path().join("sim/baseline/manifest.json").exists());
}
