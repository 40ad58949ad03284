//! Process-level tests of the command-line surface: the exit-code contract
//! (0 pass, 1 failed checks, 2 schema, 3 assumption, 4 divergence), artifact
//! layout, and sweep behavior.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use negsim::scenario::{delta_star_for, preset};

fn negsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_negsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn base_pair_config(params: &str, initial: &str, t_end: f64) -> String {
    format!(
        r#"{{
  "game": {{"preset": "lq-game", "n_players": 2, "action_dim": 1, "targets": [1.0, 2.0], "coupling": 0.1}},
  "schedule": {{"inline": {{"nodes": 2, "graphs": [[0.0, 1.0, 1.0, 0.0]], "segments": [[0, 1.0]], "repeat": true}}}},
  "params": {params},
  {initial}
  "integration": {{"h": 0.001, "t_end": {t_end}}},
  "seed": 7
}}"#
    )
}

#[test]
fn run_preset_exits_zero_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = negsim(&[
        "run",
        "lq-n2-static-pair",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["assumptions.json", "report.json", "trajectory.csv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
    assert!(report["delta_below_bound"].as_bool().unwrap());
}

#[test]
fn schema_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"game": {"bogus": true}}"#);
    let out = negsim(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = negsim(&["run", "no-such-file-or-preset.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unbalanced_graph_exits_3_naming_the_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("unbalanced.json");
    write(
        &cfg,
        r#"{
  "game": {"preset": "lq-game", "n_players": 2, "action_dim": 1, "targets": [1.0, 2.0], "coupling": 0.1},
  "schedule": {"inline": {"nodes": 2, "graphs": [[0.0, 1.0, 0.0, 0.0]], "segments": [[0, 1.0]], "repeat": true}},
  "params": {"delta": 0.05, "alpha": 1.0, "beta": 1.0},
  "integration": {"h": 0.01, "t_end": 1.0}
}"#,
    );
    let out_dir = dir.path().join("out");
    let out = negsim(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("weight balance"), "stderr: {stderr}");
    // the assumption gate persisted its findings before failing
    assert!(out_dir.join("assumptions.json").exists());
}

#[test]
fn nonzero_offset_sum_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("nusum.json");
    write(
        &cfg,
        &base_pair_config(
            r#"{"delta": 0.05, "alpha": 1.0, "beta": 1.0}"#,
            r#""initial": {"x": [0.0, 0.0], "nu": [0.3, 0.0]},"#,
            1.0,
        ),
    );
    let out = negsim(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("zero-sum initial offsets"), "stderr: {stderr}");
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("diverge.json");
    write(
        &cfg,
        &base_pair_config(
            r#"{"delta": 5000.0, "alpha": 1.0, "beta": 1.0}"#,
            "",
            50.0,
        ),
    );
    let out = negsim(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn failed_convergence_checks_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.json");
    // far too short to converge to the default tolerances
    write(
        &cfg,
        &base_pair_config(r#"{"delta": 0.05, "alpha": 1.0, "beta": 1.0}"#, "", 1.0),
    );
    let out = negsim(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_verb_validates_without_integrating() {
    let dir = tempfile::tempdir().unwrap();
    let out = negsim(&[
        "check",
        "lq-n2-static-pair",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(dir.path().join("assumptions.json").exists());
    assert!(!dir.path().join("trajectory.csv").exists());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"pass\": true"));
}

#[test]
fn delta_star_verb_prints_bound_and_inputs() {
    let out = negsim(&["delta-star", "lq-n2-static-pair"]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(value["delta_star"].as_f64().unwrap() > 0.0);
    assert!(value["lyapunov"]["p_hat"].as_f64().unwrap() > 0.0);
    assert!(value["constants"]["mu"].as_f64().unwrap() > 1.0);
}

#[test]
fn sweep_delta_fractions_of_the_bound_all_pass() {
    // derive the bound once, then sweep gains strictly below it
    let bound = delta_star_for(preset("lq-n2-static-pair").unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.json");
    write(
        &cfg,
        &base_pair_config(r#"{"delta": "auto", "alpha": 1.0, "beta": 1.0}"#, "", 250.0),
    );
    let grid = dir.path().join("grid.json");
    write(
        &grid,
        &format!(
            r#"{{"delta": [{}, {}, {}]}}"#,
            0.25 * bound.delta_star,
            0.5 * bound.delta_star,
            0.75 * bound.delta_star
        ),
    );
    let out_dir = dir.path().join("sweep");
    let out = negsim(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--grid",
        grid.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row.contains(",ok,true,"), "row: {row}");
    }
    for k in 0..3 {
        assert!(out_dir.join(format!("run_{k:03}")).join("report.json").exists());
    }
}

#[test]
fn sweep_gain_fractions_five_players() {
    // fractions of the certified bound on the switched five-player scenario;
    // horizon long enough for the slowest gain to reach the tolerances
    let bound = delta_star_for(preset("lq-n5-partition2").unwrap()).unwrap();
    let mut cfg = preset("lq-n5-partition2").unwrap();
    cfg.integration.h = 2e-3;
    cfg.integration.t_end = 900.0;
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("base.json");
    write(&cfg_path, &serde_json::to_string(&cfg).unwrap());
    let grid = dir.path().join("grid.json");
    write(
        &grid,
        &format!(
            r#"{{"delta": [{}, {}, {}]}}"#,
            0.25 * bound.delta_star,
            0.5 * bound.delta_star,
            0.75 * bound.delta_star
        ),
    );
    let out_dir = dir.path().join("sweep");
    let out = negsim(&[
        "sweep",
        cfg_path.to_str().unwrap(),
        "--grid",
        grid.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row.contains(",ok,true,"), "row: {row}");
    }
}

#[test]
fn sweep_alpha_rederives_the_bound_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.json");
    write(
        &cfg,
        &base_pair_config(r#"{"delta": "auto", "alpha": 1.0, "beta": 1.0}"#, "", 250.0),
    );
    let grid = dir.path().join("grid.json");
    write(&grid, r#"{"alpha": [0.5, 1.0, 2.0]}"#);
    let out_dir = dir.path().join("sweep");
    let out = negsim(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--grid",
        grid.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let mut stars = Vec::new();
    for row in summary.lines().skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[5], "ok");
        assert_eq!(fields[6], "true", "row: {row}");
        stars.push(fields[8].parse::<f64>().unwrap());
    }
    assert_eq!(stars.len(), 3);
    // the bound differs across alpha values
    assert!(stars[0] != stars[1] && stars[1] != stars[2]);
}

#[test]
fn sweep_empty_grid_writes_header_only_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.json");
    write(
        &cfg,
        &base_pair_config(r#"{"delta": 0.1, "alpha": 1.0, "beta": 1.0}"#, "", 1.0),
    );
    let grid = dir.path().join("grid.json");
    write(&grid, "{}");
    let out_dir = dir.path().join("sweep");
    let out = negsim(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--grid",
        grid.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn sweep_propagates_per_run_failures_without_aborting() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.json");
    // inline schedule: segment_len sweeps are a per-run schema error
    write(
        &cfg,
        &base_pair_config(r#"{"delta": 0.1, "alpha": 1.0, "beta": 1.0}"#, "", 5.0),
    );
    let grid = dir.path().join("grid.json");
    write(&grid, r#"{"delta": [0.05, 5000.0], "segment_len": [0.5]}"#);
    let out_dir = dir.path().join("sweep");
    let out = negsim(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--grid",
        grid.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    for row in summary.lines().skip(1) {
        assert!(row.contains("schema-error"), "row: {row}");
    }
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn presets_verb_lists_everything() {
    let out = negsim(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in negsim::scenario::PRESET_NAMES {
        assert!(text.contains(name));
    }
}
