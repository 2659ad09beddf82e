use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> String {
    models().join(format!("{name}.json")).display().to_string()
}

fn dynsec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynsec")).args(args).output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = dynsec(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn error_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("JSON error record")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn redundant_sensors_have_index_three() {
    let v = json_ok(&["index", "--model", &model("redundant_sensors")]);
    let chans = v["result"]["channels"].as_array().unwrap();
    assert_eq!(chans.len(), 3);
    for c in chans {
        assert_eq!(c["alpha"], 3);
        assert_eq!(c["method"], "exact");
        assert!((c["z0"]["re"].as_f64().unwrap() - 2.0).abs() < 1e-8);
        assert!(c.get("elapsed_ms").is_none());
    }
    let v = json_ok(&["index", "--model", &model("redundant_sensors_schur")]);
    assert!(v["result"]["channels"].as_array().unwrap().iter().all(|c| c["alpha"] == "inf"));
}

#[test]
fn truncated_search_reports_lower_bound() {
    let v = json_ok(&["index", "--model", &model("redundant_sensors"), "--qmax", "2", "--channel", "1"]);
    assert_eq!(v["result"]["channels"][0]["alpha"]["lower_bound"], 2);
    assert_eq!(v["config"]["q_max"], 2);
}

#[test]
fn classify_reproduces_budget_table() {
    let v = json_ok(&["classify", "--q", "1", "--model", &model("budget_example")]);
    let chans = v["result"]["channels"].as_array().unwrap();
    assert_eq!(chans[0]["alpha"], 1);
    assert_eq!(chans[0]["undetectable_attack_exists"], "yes");
    assert_eq!(chans[0]["all_attacks_i_identifiable"], "no");
    for c in &chans[1..] {
        assert_eq!(c["alpha"], 3);
        assert_eq!(c["undetectable_attack_exists"], "no");
        assert_eq!(c["all_attacks_i_identifiable"], "yes");
    }
    assert_eq!(v["result"]["all_attacks_identifiable"], "no");
    let text = dynsec(&["classify", "--q", "1", "--model", &model("budget_example"), "--format", "text"]);
    let text = String::from_utf8(text.stdout).unwrap();
    assert!(text.contains("actuator") && text.contains("all attacks identifiable: no"));
}

#[test]
fn asymptotic_classification_needs_schur_plant() {
    let out = dynsec(&["classify", "--q", "1", "--asymptotic", "--model", &model("redundant_sensors")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "hypothesis");
    let v = json_ok(&["classify", "--q", "1", "--asymptotic", "--model", &model("redundant_sensors_schur")]);
    assert_eq!(v["result"]["semantics"], "asymptotic");
}

#[test]
fn broken_models_exit_one_with_named_violation() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"A":[[1,0]],"Ba":[[1]],"C":[[1]],"Da":[[0]]}"#);
    let out = dynsec(&["validate", "--model", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "dimension");

    let rank = write(dir.path(), "rank.json", r#"{"A":[[0.5]],"Ba":[[0,0]],"C":[[1]],"Da":[[0,0]]}"#);
    let out = dynsec(&["validate", "--model", &rank]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["result"]["passed"], false);
    assert!(error_of(&out)["message"].as_str().unwrap().contains("rank [Ba; Da] = m"));
    assert_eq!(dynsec(&["index", "--model", &rank]).status.code(), Some(1));

    let out = dynsec(&["index"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_of(&out)["message"].as_str().unwrap().contains("--model"));
    let out = dynsec(&["index", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "input");
    let out = dynsec(&["index", "--model", &model("redundant_sensors"), "--channel", "7"]);
    assert_eq!(error_of(&out)["error"], "invalid_channel");
    let out = dynsec(&["index", "--model", &model("redundant_sensors"), "--tol", "-1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numeric_overflow_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "unstable.json", r#"{"A":[[10]],"Ba":[[0]],"C":[[1]],"Da":[[1]]}"#);
    let out = dynsec(&["simulate", "--model", &m, "--x0", "1", "--horizon", "400"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"], "overflow");
}

#[test]
fn zeros_of_selected_pencils() {
    let v = json_ok(&["zeros", "--model", &model("redundant_sensors")]);
    assert_eq!(v["result"]["support"], serde_json::json!([0, 1, 2]));
    let zeros = v["result"]["zeros"].as_array().unwrap();
    assert!(!zeros.is_empty());
    assert!(zeros.iter().any(|z| (z["re"].as_f64().unwrap() - 2.0).abs() < 1e-8 && z["persistent"] == true));
    for z in zeros {
        assert!(z["rank_at_z"].as_u64().unwrap() < v["result"]["normalrank"].as_u64().unwrap());
    }
    // Tall pencil: no finite zeros.
    let v = json_ok(&["zeros", "--model", &model("redundant_sensors"), "--support", "0,1"]);
    assert_eq!(v["result"]["zeros"].as_array().unwrap().len(), 0);
    let v = json_ok(&["zeros", "--model", &model("masked_channels"), "--support", ""]);
    assert_eq!(v["result"]["support"].as_array().unwrap().len(), 0);
}

#[test]
fn synthesized_attack_is_undetectable_in_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv").display().to_string();
    let v = json_ok(&["synth", "--model", &model("redundant_sensors"), "--channel", "1", "--horizon", "20", "--attack-out", &a]);
    let r = &v["result"];
    assert_eq!(r["undetectable"], true);
    assert_eq!(r["support"], serde_json::json!([0, 1, 2]));
    let x0: Vec<String> = r["x0"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap().to_string()).collect();
    let horizon = r["horizon"].as_u64().unwrap().to_string();
    let sim = json_ok(&["simulate", "--model", &model("redundant_sensors"), "--x0", &x0.join(","), "--a", &a, "--horizon", &horizon]);
    let max_y = sim["result"]["max_output"].as_f64().unwrap();
    assert!(max_y <= 1e-6 * r["scale"].as_f64().unwrap(), "max |y| = {max_y}");

    let out = dynsec(&["synth", "--model", &model("redundant_sensors_schur"), "--channel", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["error"], "contract");
}

#[test]
fn raw_output_round_trip_identifies_attack() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("c1,c2,c3\n");
    for k in 0..120 {
        let v = 1.0 + 0.5 * (0.3 * k as f64).cos();
        csv.push_str(&format!("0,{v},0\n"));
    }
    let a = write(dir.path(), "a.csv", &csv);
    let y = dir.path().join("y.csv").display().to_string();
    let m = model("redundant_sensors_schur");
    json_ok(&["simulate", "--model", &m, "--x0", "0.3,-0.2,0.1", "--a", &a, "--y-out", &y]);
    let est = dir.path().join("est.csv").display().to_string();
    let v = json_ok(&["identify", "--model", &m, "--q", "1", "--trace", &y, "--estimate-out", &est]);
    let r = &v["result"];
    assert_eq!(r["input"], "raw");
    assert_eq!(r["accepted"], true);
    assert_eq!(r["support"], serde_json::json!([1]));
    let text = std::fs::read_to_string(&est).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    let [from, to] = [r["scoring_window"][0].as_u64().unwrap() as usize, r["scoring_window"][1].as_u64().unwrap() as usize];
    for (k, row) in rows.iter().enumerate().take(to).skip(from) {
        let truth = 1.0 + 0.5 * (0.3 * k as f64).cos();
        assert!((row[1] - truth).abs() < 1e-6, "sample {k}: {} vs {truth}", row[1]);
        assert!(row[0].abs() < 1e-9 && row[2].abs() < 1e-9);
    }
}

#[test]
fn filter_and_apply_cancel_disturbance() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("masked_channels");
    let f = json_ok(&["filter", "--model", &m]);
    assert_eq!(f["result"]["m_prime"], 1);
    assert_eq!(f["result"]["residual_channels"], 0);
    let m2 = write(
        dir.path(),
        "dist.json",
        r#"{"A":[[0.5,0],[0,0.2]],"Bd":[[1],[0]],"Ba":[[0],[0]],"C":[[1,0],[0,1]],"Dd":[[0],[0]],"Da":[[0],[1]]}"#,
    );
    let f = json_ok(&["filter", "--model", &m2]);
    assert_eq!(f["result"]["residual_channels"], 1);
    let mut csv = String::from("c1\n");
    for k in 0..40 {
        csv.push_str(&format!("{}\n", (0.7 * k as f64).sin()));
    }
    let d = write(dir.path(), "d.csv", &csv);
    let y = dir.path().join("y.csv").display().to_string();
    json_ok(&["simulate", "--model", &m2, "--d", &d, "--y-out", &y]);
    let v = json_ok(&["apply", "--model", &m2, "--trace", &y]);
    let samples = v["result"]["residual"]["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 40);
    assert!(samples.iter().flat_map(|s| s.as_array().unwrap()).all(|x| x.as_f64().unwrap().abs() < 1e-12));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let m = model("budget_example");
    let runs: [&[&str]; 5] = [
        &["index", "--model", &m, "--seed", "7"],
        &["classify", "--model", &m, "--q", "1", "--seed", "7"],
        &["zeros", "--model", &m, "--seed", "7"],
        &["filter", "--model", &model("masked_channels"), "--seed", "7"],
        &["synth", "--model", &m, "--channel", "2", "--horizon", "10", "--seed", "7"],
    ];
    for args in runs {
        let first = dynsec(args);
        let second = dynsec(args);
        assert!(first.status.success(), "{args:?}");
        assert_eq!(first.stdout, second.stdout, "{args:?}");
        let v: Value = serde_json::from_slice(&first.stdout).unwrap();
        assert_eq!(v["config"]["seed"], 7);
    }
}

#[test]
fn timings_are_opt_in() {
    let v = json_ok(&["index", "--model", &model("redundant_sensors"), "--timings"]);
    assert!(v["result"]["channels"][0]["elapsed_ms"].as_f64().unwrap() < 1000.0);
}
