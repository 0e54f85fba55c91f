use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn toa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toa"))
        .args(args)
        .env_remove("TOA_SEED")
        .output()
        .expect("spawn toa")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn solve_noise_free_mode2_recovers_truth() {
    let path = fixture("noisefree.json");
    let out = toa(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["mode"], "mode2");
    assert_eq!(v["converged"], true);
    assert_eq!(v["termination"]["kind"], "converged");
    assert_eq!(v["theta"].as_array().unwrap().len(), 6);
    assert!(v["position_error_m"].as_f64().unwrap() < 1e-6);
}

#[test]
fn solve_noise_free_mode1_with_known_velocity() {
    let path = fixture("noisefree_mode1.json");
    let out = toa(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["theta"].as_array().unwrap().len(), 4);
    assert!(v["position_error_m"].as_f64().unwrap() < 1e-6);
}

#[test]
fn solve_underdetermined_exits_one() {
    let path = fixture("two_anchors_mode2.json");
    let out = toa(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("insufficient measurements"), "{err}");
    assert!(err.contains("6 required"), "{err}");
}

#[test]
fn solve_not_converged_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(fixture("noisefree.json")).unwrap()).unwrap();
    doc["solver"] = serde_json::json!({ "max_iterations": 1 });
    let path = dir.path().join("one_iter.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = toa(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["converged"], false);
    assert_eq!(v["termination"]["kind"], "max_iterations");
}

#[test]
fn solve_synthetic_is_deterministic_and_seed_precedence_holds() {
    let path = fixture("synthetic_mode1.json");
    let p = path.to_str().unwrap();
    let a = toa(&["solve", "--config", p]);
    let b = toa(&["solve", "--config", p]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);

    // The fixture carries seed 42; the flag and the environment both override it.
    let flag = toa(&["solve", "--config", p, "--seed", "42"]);
    assert_eq!(flag.stdout, a.stdout);
    let other = toa(&["solve", "--config", p, "--seed", "43"]);
    assert_ne!(other.stdout, a.stdout);

    let env = Command::new(env!("CARGO_BIN_EXE_toa"))
        .args(["solve", "--config", p])
        .env("TOA_SEED", "43")
        .output()
        .unwrap();
    assert_eq!(env.stdout, other.stdout);

    let both = Command::new(env!("CARGO_BIN_EXE_toa"))
        .args(["solve", "--config", p, "--seed", "42"])
        .env("TOA_SEED", "43")
        .output()
        .unwrap();
    assert_eq!(both.stdout, a.stdout);
}

#[test]
fn unknown_field_is_named_in_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.json");
    std::fs::write(&path, r#"{"schema":1,"kind":"noise-sweep","trails":3}"#).unwrap();
    let out = toa(&["experiment", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("trails"), "{}", stderr(&out));
}

#[test]
fn missing_schema_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noschema.json");
    std::fs::write(&path, r#"{"instances":10}"#).unwrap();
    let out = toa(&["verify-theorems", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("schema"));
}

#[test]
fn missing_config_file_exits_one() {
    let out = toa(&["solve", "--config", "/nonexistent/toa.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_exits_one() {
    assert_eq!(toa(&["localize"]).status.code(), Some(1));
    assert_eq!(toa(&["--help"]).status.code(), Some(0));
}

#[test]
fn crlb_reports_every_requested_mode_in_order() {
    let path = fixture("crlb.json");
    let out = toa(&["crlb", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let reports = v.as_array().unwrap();
    assert!(!reports.is_empty());
    let rss = |m: &str| {
        reports
            .iter()
            .find(|r| r["mode"] == m)
            .map(|r| r["position_crlb_rss"].as_f64().unwrap())
    };
    let (m1, m2) = (rss("mode1").unwrap(), rss("mode2").unwrap());
    assert!(m1 < m2, "{m1} {m2}");
    if let Some(ow) = rss("owlas") {
        assert!(m2 < ow);
    }
}

#[test]
fn predict_bias_ctwlas_and_deviated() {
    let ct = toa(&["predict-bias", "--config", fixture("ctwlas_bias.json").to_str().unwrap()]);
    assert_eq!(ct.status.code(), Some(0), "{}", stderr(&ct));
    let ct = json(&ct);
    assert_eq!(ct["assumed_velocity_mps"], serde_json::json!([0.0, 0.0]));
    let ct_bias = ct["bias"].as_array().unwrap();
    assert_eq!(ct_bias.len(), 4);
    assert!(ct_bias.iter().any(|b| b.as_f64().unwrap().abs() > 1e-6));

    let dv = toa(&["predict-bias", "--config", fixture("deviated_bias.json").to_str().unwrap()]);
    assert_eq!(dv.status.code(), Some(0), "{}", stderr(&dv));
    let dv = json(&dv);
    let total = dv["predicted_rmse_total"].as_f64().unwrap();
    let pos = dv["predicted_rmse_position"].as_f64().unwrap();
    let clk = dv["predicted_rmse_clock"].as_f64().unwrap();
    assert!(pos > 0.0 && clk > 0.0 && total >= pos && total >= clk);
    // A smaller velocity error than the ctwlas case should predict a smaller bias.
    assert!(pos < ct["predicted_rmse_position"].as_f64().unwrap());
}

#[test]
fn verify_theorems_default_run_holds() {
    let out = toa(&["verify-theorems", "--instances", "1000", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["instances"], 1000);
    assert_eq!(v["theorem1_violations"], 0);
    assert_eq!(v["theorem2_violations"], 0);
    assert_eq!(v["all_hold"], true);
}

#[test]
fn verify_theorems_equal_delays_reports_equalities() {
    let path = fixture("theorems.json");
    let out = toa(&["verify-theorems", "--config", path.to_str().unwrap(), "--equal-delays"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let n = v["instances"].as_u64().unwrap();
    assert_eq!(n, 200);
    let skipped = v["singular_skipped"].as_u64().unwrap();
    assert_eq!(v["theorem2_equalities"].as_u64().unwrap() + skipped, n);
}

#[test]
fn verify_theorems_zero_instances_exits_one() {
    let out = toa(&["verify-theorems", "--config", fixture("theorems_zero.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("instances"));
}

#[test]
fn experiment_noise_sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("noise.csv");
    let out = toa(&[
        "experiment",
        "--kind",
        "noise-sweep",
        "--trials",
        "40",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(
        &header[..11],
        [
            "sweep_value",
            "mode",
            "n_trials",
            "n_converged",
            "pos_rmse_m",
            "clk_rmse_m",
            "pos_crlb_m",
            "clk_crlb_m",
            "pred_rmse_m",
            "success_rate",
            "mean_solve_us"
        ]
    );
    let rows = csv_rows(&text);
    for mode in ["mode1", "mode2"] {
        let n = rows.iter().filter(|r| r[1] == mode).count();
        assert_eq!(n, 6, "{mode}");
    }
    assert!(rows.iter().all(|r| r[2] == "40" && r.len() == header.len()));

    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("noise.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema"], 1);
    assert_eq!(manifest["config"]["trials"], 40);
    assert_eq!(manifest["rows"].as_u64().unwrap() as usize, rows.len());
    assert_eq!(manifest["csv_columns"].as_array().unwrap().len(), header.len());
}

#[test]
fn experiment_is_reproducible_across_job_counts() {
    let path = fixture("noise_sweep_small.json");
    let p = path.to_str().unwrap();
    let a = toa(&["experiment", "--config", p, "--jobs", "1"]);
    let b = toa(&["experiment", "--config", p, "--jobs", "3"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let rows = csv_rows(&String::from_utf8(a.stdout).unwrap());
    assert!(rows.iter().all(|r| r[2] == "50"));
}

#[test]
fn experiment_success_rate_preset_rows() {
    let out = toa(&["experiment", "--preset", "success-rate", "--trials", "20"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let mut radii: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    radii.dedup();
    assert_eq!(radii, ["10", "50", "100", "200"]);
    for r in &rows {
        let s: f64 = r[9].parse().unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
}

#[test]
fn experiment_iteration_profile_records_timing() {
    let out = toa(&["experiment", "--kind", "iteration-profile", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    let levels: Vec<f64> = rows.iter().filter(|r| r[1] == "mode1").map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(levels, (1..=10).map(f64::from).collect::<Vec<_>>());
    assert!(rows.iter().all(|r| r[10].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn experiment_rejects_conflicting_or_invalid_input() {
    assert_eq!(
        toa(&["experiment", "--kind", "noise-sweep", "--preset", "speed-sweep"]).status.code(),
        Some(1)
    );
    assert_eq!(toa(&["experiment", "--kind", "warp-drive"]).status.code(), Some(1));
    assert_eq!(toa(&["experiment", "--kind", "noise-sweep", "--trials", "0"]).status.code(), Some(1));
    let bad = toa(&["experiment", "--config", fixture("bad_sweep.json").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("sweep value"));
}
