use std::process::{Command, Output};

fn slowfast(args: &[&str], dir: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slowfast")).args(args).current_dir(dir).output().expect("binary runs")
}

#[test]
fn classify_example21() {
    let dir = tempfile::tempdir().unwrap();
    let out = slowfast(&["classify", "--model", "example21", "--x", "0.5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["strongly_ergodic"], serde_json::Value::Bool(false));
    assert_eq!(v["report"]["exp_ergodic"], serde_json::Value::Bool(true));
    // no --out: the manifest lands in the working directory
    assert!(dir.path().join("classify.manifest.json").exists());
}

#[test]
fn averaged_csv_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("avg.csv");
    let out = slowfast(
        &["averaged", "--model", "example21", "--x-grid", "0:1:0.1", "--format", "csv", "--out", csv.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,b_bar,a_bar,sigma_bar"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|s| s.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][1], 1.0);
    for r in &rows[1..] {
        assert!((r[1] - (2.0 - r[0])).abs() < 1e-12);
    }
    assert!(dir.path().join("avg.csv.manifest.json").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing_flag = slowfast(&["classify", "--model", "example21"], dir.path());
    assert_eq!(missing_flag.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_flag.stderr).contains("Usage"));
    let missing_model = slowfast(&["classify", "--x", "0.5"], dir.path());
    assert_eq!(missing_model.status.code(), Some(2));
    let unknown = slowfast(&["classify", "--model", "nope", "--x", "0.5"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("example21"));
}

#[test]
fn numerical_errors_exit_3_with_json() {
    let dir = tempfile::tempdir().unwrap();
    // huge steps overflow the slow state
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "dt = 1e300\nhorizon = 1e301\nn_paths = 2\n").unwrap();
    let out = slowfast(
        &["converge", "--model", "ou-coupled", "--epsilons", "1e302", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["error"], "blow-up");
}

#[test]
fn replay_is_bit_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("run.json");
    let out = slowfast(
        &[
            "l2fail",
            "--epsilons",
            "0.1",
            "--n-paths",
            "64",
            "--horizon",
            "0.5",
            "--seed",
            "42",
            "--threads",
            "1",
            "--out",
            first.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.path().join("run.json.manifest.json");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["seed"], 42);
    assert_eq!(m["command"], "l2fail");
    for (threads, seq) in [("3", false), ("2", true)] {
        let again = dir.path().join(format!("replay-{threads}.json"));
        let mut args = vec![
            "replay",
            "--manifest",
            manifest.to_str().unwrap(),
            "--threads",
            threads,
            "--out",
            again.to_str().unwrap(),
        ];
        if seq {
            args.push("--sequential");
        }
        let out = slowfast(&args, dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn list_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = slowfast(&["list-models", "--format", "csv"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["example21", "ou-coupled", "pure-fast-l2"] {
        assert!(text.contains(name));
    }
}

#[test]
fn negative_values_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = slowfast(
        &[
            "decay",
            "--model",
            "ou-coupled",
            "--x",
            "-0.5",
            "--y0",
            "2",
            "--y1",
            "-1",
            "--times",
            "0.5,1",
            "--n-paths",
            "64",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out =
        slowfast(&["distance", "--model", "ou-coupled", "--metric", "w1", "--x1", "-1", "--x2", "0.5"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["report"]["value"].as_f64().unwrap() - 1.5).abs() < 1e-4);
}
