use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn shrink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shrink")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn correlate_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("corr");
    let out = shrink(&["correlate", "--ensemble", "400", "--level", "4", "--max-lag", "8", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["exact.csv", "monte_carlo.csv", "decay.csv", "config.txt", "summary.txt", "timing.txt"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("preset=correlation\n"));
    assert_eq!(fs::read_to_string(dir.join("summary.txt")).unwrap(), stdout);
    assert!(fs::read_to_string(dir.join("config.txt")).unwrap().contains("level=4\n"));
}

#[test]
fn runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("h");
    let run = || {
        let out = shrink(&["run", "holder2", "--max-m", "3000", "--ensemble", "6", "--seed", "9", "--out-dir", dir.to_str().unwrap()]);
        assert!(matches!(code(&out), 0 | 1), "{}", String::from_utf8_lossy(&out.stderr));
        files(&dir)
    };
    assert_eq!(run(), run());
}

#[test]
fn hypothesis_gate_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("gate");
    let args = ["run", "bv1", "--measure", "reciprocal:0.5", "--max-m", "2000", "--ensemble", "6", "--out-dir", dir.to_str().unwrap()];
    let out = shrink(&args);
    assert_eq!(code(&out), 2);
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("hypotheses_ok=false\n"));
    assert!(!summary.contains("table="));

    let mut forced = args.to_vec();
    forced.push("--force");
    let out = shrink(&forced);
    assert_eq!(code(&out), 2);
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("forced=true\n"));
    assert!(summary.contains("warning"));
    assert!(dir.join("final.csv").is_file());
}

#[test]
fn short_precision_budget_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = shrink(&["run", "holder2", "--max-m", "2000", "--bits", "1000", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1000 bits"));
}

#[test]
fn failed_check_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("strict.txt");
    fs::write(&cfg, "preset=holder2\nmax_m=2000\nensemble=6\ntol_y=0\n").unwrap();
    let dir = tmp.path().join("strict");
    let out = shrink(&["run", "holder2", "--config", cfg.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("check.y_pm_small_fraction=fail"));
}

#[test]
fn check_hypotheses_exit_codes() {
    let ok = shrink(&["check-hypotheses", "bv2"]);
    assert_eq!(code(&ok), 0);
    assert!(String::from_utf8(ok.stdout).unwrap().ends_with("applies=true\n"));
    let bad = shrink(&["check-hypotheses", "bv1", "--measure", "reciprocal:0.5"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn usage_errors_exit_4() {
    assert_eq!(code(&shrink(&["run", "bv1", "--nope"])), 4);
    assert_eq!(code(&shrink(&["run", "bogus"])), 4);
    assert_eq!(code(&shrink(&["run", "bv1", "--map", "tent"])), 4);
    assert_eq!(code(&shrink(&["run", "bv2", "--config", "/nonexistent/cfg.txt"])), 4);
    assert_eq!(code(&shrink(&["--help"])), 0);
}
