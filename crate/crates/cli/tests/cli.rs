use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn planeslam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planeslam")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("error line on stderr");
    serde_json::from_str(line).expect("machine-readable error")
}

#[test]
fn simulate_then_run_from_scans() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = planeslam(&["simulate", "--scene", "room", "--frames", "6", "--seed", "4", "--out", path(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scans: Vec<_> = fs::read_dir(sim.join("scans")).unwrap().collect();
    assert_eq!(scans.len(), 6);
    assert_eq!(fs::read_to_string(sim.join("ground_truth.txt")).unwrap().lines().count(), 6);

    let run_dir = dir.path().join("run");
    let out = planeslam(&["run", "--scans-dir", path(&sim.join("scans")), "--out", path(&run_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["map.json", "trajectory.txt", "graph.txt", "report.json", "report.txt", "map_corners.csv", "config.json"] {
        assert!(run_dir.join(f).exists(), "{f} missing");
    }
    let traj = fs::read_to_string(run_dir.join("trajectory.txt")).unwrap();
    assert_eq!(traj.lines().count(), 6);
    assert!(traj.lines().next().unwrap().starts_with("0 0 0 0 0 0 0 1"));
}

#[test]
fn run_scene_and_score_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = planeslam(&["run", "--scene", "room", "--frames", "8", "--noise-sigma", "0.01", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Plane extraction") && stdout.contains("Total"));

    let m = planeslam(&[
        "metrics",
        "--est",
        path(&dir.path().join("trajectory.txt")),
        "--gt",
        path(&dir.path().join("ground_truth.txt")),
    ]);
    assert!(m.status.success());
    let v: serde_json::Value = serde_json::from_slice(&m.stdout).unwrap();
    assert!(v["rmse"].as_f64().unwrap() < 0.1);

    let plan_dir = dir.path().join("plan");
    let p = planeslam(&[
        "plan",
        "--map",
        path(&dir.path().join("map.json")),
        "--start",
        "0,0,1.4",
        "--nodes",
        "50",
        "--out",
        path(&plan_dir),
    ]);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    let tree: serde_json::Value = serde_json::from_str(&fs::read_to_string(plan_dir.join("tree.json")).unwrap()).unwrap();
    assert_eq!(tree["nodes"].as_array().unwrap().len(), 50);
    assert!(plan_dir.join("rrt_edges.csv").exists());
}

#[test]
fn bench_prints_timing_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = planeslam(&["bench", "--scene", "room", "--frames", "4", "--out", path(dir.path())]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for row in ["Plane extraction", "Registration", "Loop closure", "Merging", "Total"] {
        assert!(stdout.contains(row), "{row}");
    }
    assert!(dir.path().join("bench.json").exists());
}

#[test]
fn failures_are_machine_readable() {
    let out = planeslam(&["run", "--scene", "castle"]);
    assert!(!out.status.success());
    assert_eq!(error_json(&out)["error"], "config");

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"mapping": {"min_aera": 0.1}}"#).unwrap();
    let out = planeslam(&["run", "--scene", "room", "--config", path(&cfg)]);
    assert!(!out.status.success());
    assert_eq!(error_json(&out)["error"], "json");

    let out = planeslam(&["metrics", "--est", path(&dir.path().join("none.txt")), "--gt", path(&cfg)]);
    assert!(!out.status.success());
    assert_eq!(error_json(&out)["error"], "io");

    let out = planeslam(&["run"]);
    assert!(!out.status.success());
}
