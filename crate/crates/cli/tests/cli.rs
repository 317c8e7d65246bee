use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fadingmac"))
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sweep_matches_golden_csv() {
    let cfg = golden("tiny.toml");
    let want = std::fs::read_to_string(golden("tiny_sweep.csv")).unwrap();
    for workers in ["1", "3"] {
        let o = bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .args(["--workers", workers])
            .output()
            .unwrap();
        assert_eq!(stdout(&o), want, "workers = {workers}");
    }
}

#[test]
fn out_dir_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["simulate", "--config"])
        .arg(golden("tiny.toml"))
        .args(["--seed", "11", "--reps", "2", "--set", "sim.horizon_s=1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("tiny_simulate.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap();
    let f: Vec<&str> = first.split(',').collect();
    assert_eq!(f[0..4], ["tiny", "1", "0", "reliability"]);
    assert_eq!(f[4], "", "analytic column stays empty");
    assert_eq!(f[7], "2");
}

#[test]
fn compare_fills_both_engines() {
    let o = bin()
        .args(["compare", "--config"])
        .arg(golden("tiny.toml"))
        .args(["--set", "sim.horizon_s=1"])
        .output()
        .unwrap();
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario_id,src,dst,metric,analytic_value,sim_mean,sim_ci95_half,replications,warnings"
    );
    let rel = lines.find(|l| l.contains(",reliability,")).unwrap();
    let f: Vec<&str> = rel.split(',').collect();
    assert!(f[4].parse::<f64>().is_ok() && f[5].parse::<f64>().is_ok(), "{rel}");
}

#[test]
fn failures_exit_nonzero_with_json_summary() {
    let o = bin()
        .args(["analyze", "--config"])
        .arg(golden("tiny.toml"))
        .args(["--set", "mac.m0=9"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "validation");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[topology]\nkind = \"star\"\nnodes = = 2\n").unwrap();
    let o = bin().args(["analyze", "--config"]).arg(&bad).output().unwrap();
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
    assert_eq!(err["error"]["line"], 3);

    let o = bin().args(["analyze", "--config", "/nonexistent.toml"]).output().unwrap();
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}

#[test]
fn sweep_needs_a_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "[topology]\nkind = \"line\"\nnodes = 2\n[traffic]\nlambda = 1\n").unwrap();
    let o = bin().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert!(!o.status.success());
}
