use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aggnash"))
}

fn config(dir: &Path, algorithm: &str, topology: &str, stepsize: &str) -> PathBuf {
    let path = dir.join(format!("{algorithm}_{topology}.toml"));
    let text = format!(
        r#"algorithm = "{algorithm}"
topology = "{topology}"
iters = 300
sample_paths = 3
master_seed = 5

[game]
source = "seeded"
seed = 9
players = 6
locations = 3

[stepsize]
{stepsize}
"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn run_writes_tables_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "sync", "cycle", "kind = \"harmonic\"");
    let out_dir = dir.path().join("out");
    let stdout = ok(bin()
        .args(["run", "-c"])
        .arg(&cfg)
        .args(["--paths", "2", "--iters", "100", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap());
    assert!(stdout.contains("mean_error"));
    let csv = std::fs::read_to_string(out_dir.join("errors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["sample_paths"], 2);
    assert_eq!(report["iters"], 100);
}

#[test]
fn seed_override_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "gossip", "wheel", "kind = \"update_count\"");
    let run = |seed: &str| ok(bin().args(["run", "-c"]).arg(&cfg).args(["--seed", seed]).output().unwrap());
    assert_eq!(run("1"), run("1"));
    assert_ne!(run("1"), run("2"));
}

#[test]
fn oracle_prints_solution_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "sync", "cycle", "kind = \"harmonic\"");
    let v: serde_json::Value = serde_json::from_str(&ok(bin().args(["oracle", "-c"]).arg(&cfg).output().unwrap())).unwrap();
    assert_eq!(v["x"].as_array().unwrap().len(), 6);
    assert!(v["residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn lambda_lists_requested_topologies() {
    let stdout = ok(bin()
        .args(["lambda", "--players", "10", "--topology", "cycle", "complete"])
        .output()
        .unwrap());
    assert!(stdout.contains("Cycle") && stdout.contains("Complete"));
    assert!(!stdout.contains("Wheel"));
}

#[test]
fn concurrence_and_bounds_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "gossip", "complete", "kind = \"update_count\"\nc = 9.0");
    let v: serde_json::Value = serde_json::from_str(&ok(bin()
        .args(["concurrence", "-c"])
        .arg(&cfg)
        .args(["--threshold", "0.5", "--iters", "20000"])
        .output()
        .unwrap()))
    .unwrap();
    assert_eq!(v["per_path"].as_array().unwrap().len(), 3);

    let cfg = config(dir.path(), "gossip", "cycle", "kind = \"uniform_constant\"\nlo = 0.001\nhi = 0.001");
    let v: serde_json::Value = serde_json::from_str(&ok(bin()
        .args(["bounds", "-c"])
        .arg(&cfg)
        .args(["--samples", "100"])
        .output()
        .unwrap()))
    .unwrap();
    assert!(v["bound"]["bound"].as_f64().unwrap() > 0.0);
    assert_eq!(v["constants"]["agents"], 6);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin().args(["run", "-c"]).arg(dir.path().join("missing.toml")).output().unwrap();
    assert!(!missing.status.success());
    let cfg = config(dir.path(), "gossip", "cycle", "kind = \"harmonic\"");
    let invalid = bin().args(["run", "-c"]).arg(&cfg).output().unwrap();
    assert!(!invalid.status.success());
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("invalid"));
    assert!(!bin().args(["lambda", "--topology", "torus"]).output().unwrap().status.success());
}
