use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const HEADER: &str =
    "iteration,t_s,tip_x_mm,tip_y_mm,tip_z_mm,tension_N,displacement_mm,error_mm,lyapunov,shoot_iters,shoot_residual";

fn tdcr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdcr"))
        .args(args)
        .current_dir(dir)
        .env("COSSERAT_PROFILE", "fast")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn idle_config(dir: &Path) -> String {
    write(
        dir,
        "idle.json",
        r#"{
  "name": "idle",
  "simulation": {
    "rod": { "gravity": [0.0, 0.0, 0.0] },
    "controller": { "kind": "constant", "tension": 0.0 },
    "scenario": { "kind": "nominal" },
    "horizon": 12
  }
}"#,
    )
}

#[test]
fn simulate_writes_trace_and_summary() {
    let tmp = TempDir::new().unwrap();
    let out = tdcr(
        tmp.path(),
        &[
            "simulate",
            "--config",
            "nominal_backstepping",
            "--out",
            "run",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let trace = fs::read_to_string(tmp.path().join("run/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 100);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 100.0);
    assert!((last[2] - 340.0).abs() < 2.0, "final tip x {}", last[2]);
    assert!(rows.iter().all(|r| r[10] <= 1e-6));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["name"], "nominal_backstepping");
    assert_eq!(summary["config"]["simulation"]["rod"]["nodes"], 40);
    assert_eq!(
        summary["config"]["simulation"]["controller"]["alpha1"],
        1500.0
    );
    assert!(summary["metrics"]["tpl_mm"].as_f64().unwrap() > 340.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    for dir in ["a", "b"] {
        let out = tdcr(
            tmp.path(),
            &[
                "simulate",
                "--config",
                "disturbance_smc",
                "--horizon",
                "60",
                "--out",
                dir,
            ],
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for file in ["trace.csv", "summary.json"] {
        let a = fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn missing_key_is_named() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.json",
        r#"{"name": "bad", "simulation": {"controller": {"kind": "backstepping"}}}"#,
    );
    let out = tdcr(tmp.path(), &["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`scenario`"), "{}", stderr(&out));
}

#[test]
fn every_violation_is_listed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.json",
        r#"{"name": "bad", "simulation": {
            "rod": {"radius": -0.001, "poisson_ratio": 0.7},
            "controller": {"kind": "sliding-mode", "c": -1.0},
            "scenario": {"kind": "nominal"},
            "dt": 0.0
        }}"#,
    );
    let out = tdcr(tmp.path(), &["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    for key in [
        "simulation.rod.radius",
        "simulation.rod.poisson_ratio",
        "simulation.controller.c",
        "simulation.dt",
    ] {
        assert!(msg.contains(key), "{key} missing from {msg}");
    }
}

#[test]
fn dry_run_prints_resolved_config_only() {
    let tmp = TempDir::new().unwrap();
    let out = tdcr(
        tmp.path(),
        &[
            "simulate",
            "--config",
            "weight50_smc",
            "--horizon",
            "7",
            "--dry-run",
            "--out",
            "run",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let config: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(config["simulation"]["horizon"], 7);
    assert_eq!(config["simulation"]["scenario"]["weight_mass"], 0.05);
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn bad_profile_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tdcr"))
        .args(["validate", "--config", "nominal_smc"])
        .current_dir(tmp.path())
        .env("COSSERAT_PROFILE", "turbo")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("COSSERAT_PROFILE"));
}

#[test]
fn solver_failure_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    // A straight weightless rod gives the controller no authority.
    let cfg = write(
        tmp.path(),
        "straight.json",
        r#"{"name": "straight", "simulation": {
            "rod": {"gravity": [0.0, 0.0, 0.0]},
            "controller": {"kind": "backstepping"},
            "scenario": {"kind": "nominal"}
        }}"#,
    );
    let out = tdcr(tmp.path(), &["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("iteration 1"), "{}", stderr(&out));
}

#[test]
fn compare_tabulates_both_runs() {
    let tmp = TempDir::new().unwrap();
    let out = tdcr(
        tmp.path(),
        &[
            "compare",
            "--config",
            "nominal_backstepping",
            "--config",
            "nominal_backstepping",
            "--horizon",
            "40",
            "--out",
            "cmp",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let cols: Vec<&str> = row.split_whitespace().collect();
        let n = cols.len();
        assert_eq!(cols[n - 1], cols[n - 2], "{row}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("cmp/compare.json")).unwrap())
            .unwrap();
    assert_eq!(json["metrics"][0], json["metrics"][1]);
}

#[test]
fn compare_rejects_mismatched_scenarios() {
    let tmp = TempDir::new().unwrap();
    let out = tdcr(
        tmp.path(),
        &[
            "compare",
            "--config",
            "nominal_backstepping",
            "--config",
            "weight20_smc",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("different scenarios"));
}

#[test]
fn plot_overlays_traces() {
    let tmp = TempDir::new().unwrap();
    for (cfg, dir) in [("nominal_backstepping", "bs"), ("nominal_smc", "smc")] {
        let out = tdcr(
            tmp.path(),
            &["simulate", "--config", cfg, "--horizon", "30", "--out", dir],
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let out = tdcr(
        tmp.path(),
        &["plot", "bs/trace.csv", "smc/trace.csv", "--out", "fig"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for panel in ["tip_x.svg", "tip_z.svg", "displacement.svg", "error.svg"] {
        let svg = fs::read_to_string(tmp.path().join("fig").join(panel)).unwrap();
        assert!(svg.starts_with("<svg"));
        for label in ["bs", "smc"] {
            assert!(
                svg.lines().any(|l| l.trim() == label),
                "{panel} lacks legend entry {label}"
            );
        }
    }
}

#[test]
fn plot_rejects_bad_traces() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "empty.csv", &format!("{HEADER}\n"));
    let out = tdcr(tmp.path(), &["plot", "empty.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no rows"));

    write(
        tmp.path(),
        "broken.csv",
        &format!("{HEADER}\n1,0.01,0,0,500,0,0,0,0,1,0\n2,0.02,oops,0,500,0,0,0,0,1,0\n"),
    );
    let out = tdcr(tmp.path(), &["plot", "broken.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn rodshape_needs_stored_shapes() {
    let tmp = TempDir::new().unwrap();
    let cfg = idle_config(tmp.path());
    let out = tdcr(tmp.path(), &["simulate", "--config", &cfg, "--out", "run"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = tdcr(tmp.path(), &["rodshape", "--run", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--store-shapes"));
}

#[test]
fn rodshape_strides() {
    let tmp = TempDir::new().unwrap();
    let cfg = idle_config(tmp.path());
    let out = tdcr(
        tmp.path(),
        &[
            "simulate",
            "--config",
            &cfg,
            "--out",
            "run",
            "--store-shapes",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let shapes: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/shapes.json")).unwrap())
            .unwrap();
    let shapes = shapes["shapes"].as_array().unwrap();
    assert_eq!(shapes.len(), 13);
    // An idle weightless rod stays on the z-axis.
    for p in shapes.iter().flat_map(|s| s.as_array().unwrap()) {
        assert!(p[0].as_f64().unwrap().abs() < 1e-9 && p[1].as_f64().unwrap().abs() < 1e-9);
    }

    let count = |every: &str, file: &str| {
        let out = tdcr(
            tmp.path(),
            &["rodshape", "--run", "run", "--every", every, "--out", file],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        // Centerlines are the only 2-px strokes.
        fs::read_to_string(tmp.path().join(file))
            .unwrap()
            .lines()
            .filter(|l| l.starts_with("<polyline") && l.contains("stroke-width=\"2\""))
            .count()
    };
    assert_eq!(count("1", "all.svg"), 13);
    assert_eq!(count("5", "five.svg"), 3);
    assert_eq!(count("50", "last.svg"), 1);
}
