use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_semconflict"));
    c.env_remove("SEMCONFLICT_SEED");
    c
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn corpus(dir: &Path) {
    let o = run(bin()
        .args(["corpus", "gen", "--seed", "42", "--sc", "1", "--benign", "1", "--out"])
        .arg(dir));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn workspace(dir: &Path, prefix: &str) -> std::path::PathBuf {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .unwrap()
}

const FAST: [&str; 4] = ["--rn", "3", "--budget-ms", "0"];

#[test]
fn benign_exits_zero_and_sc_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let o = run(bin().arg("run").arg(workspace(dir.path(), "benign")).args(FAST));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let out = dir.path().join("out");
    let o = run(bin().arg("run").arg(workspace(dir.path(), "sc")).args(FAST).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "inventory.json", "pool.json", "tests.json", "report.json", "predictions.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(!report["pairs"].as_array().unwrap().is_empty());

    let o = run(bin().arg("report").arg(out.join("report.json")));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 SC issue(s)"));
}

#[test]
fn malformed_manifest_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"seed": "x"}"#).unwrap();
    let o = run(bin().arg("run").arg(workspace(dir.path(), "sc")).arg("--manifest").arg(&bad));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest"));
}

#[test]
fn env_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let ws = workspace(dir.path(), "benign");
    let o = run(bin()
        .env("SEMCONFLICT_SEED", "777")
        .arg("run")
        .arg(&ws)
        .args(FAST)
        .args(["--seed", "5"]));
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["manifest"]["seed"], 777);
}

#[test]
fn metrics_from_counts() {
    let o = run(bin().args(["metrics", "--cm", "57,14,136,18"]));
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("0.803   0.760     0.781"));
    let o = run(bin().args(["metrics", "--cm", "1,2,3"]));
    assert_eq!(o.status.code(), Some(1));
}
