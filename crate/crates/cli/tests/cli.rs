use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_relicomp");

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/two-component-system.json")
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("RELICOMP_PRECISION");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Parsed CSV: header names and numeric rows.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

const TWO_PATHS: &str = r#"{
  "components": {
    "a": {"v0": 69.0, "b": 4.3553e-5, "end_of_test": 91208.0},
    "b": {"v0": 74.0, "b": 2.7482e-5, "end_of_test": 91208.0},
    "c": {"v0": 30.0, "b": 9.1e-5, "end_of_test": 60000.0}
  },
  "paths": [
    {"components": ["a", "b"], "probability": 0.3, "last_failure_time": 80000.0},
    {"components": ["b", "c"], "probability": 0.7, "last_failure_time": 88682.0}
  ],
  "system_last_failure": 88682.0
}"#;

fn single_path(components: &str, last: f64) -> String {
    format!(
        r#"{{
  "components": {{
    "a": {{"v0": 69.0, "b": 4.3553e-5, "end_of_test": 91208.0}},
    "b": {{"v0": 74.0, "b": 2.7482e-5, "end_of_test": 91208.0}},
    "c": {{"v0": 30.0, "b": 9.1e-5, "end_of_test": 60000.0}}
  }},
  "paths": [{{"components": {components}, "probability": 1.0, "last_failure_time": {last:?}}}],
  "system_last_failure": 88682.0
}}"#
    )
}

#[test]
fn predict_is_byte_identical_across_runs() {
    let f = fixture();
    let args = ["predict", f.to_str().unwrap(), "--grid", "64"];
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn zero_only_grid_gives_one() {
    let f = fixture();
    let out = ok(&["predict", f.to_str().unwrap(), "--grid", "1"]);
    assert_eq!(out, "tau_since_failure,system,path_1\n0,1,1\n");
}

#[test]
fn two_path_prediction_is_the_weighted_sum() {
    let dir = TempDir::new().unwrap();
    let both = write(&dir, "both.json", TWO_PATHS);
    let first = write(&dir, "first.json", &single_path(r#"["a", "b"]"#, 80000.0));
    let second = write(&dir, "second.json", &single_path(r#"["b", "c"]"#, 88682.0));
    let grid = ["--grid", "33", "--tau-max", "40000"];

    let (h, rows) = csv(&ok(&[&["predict", &both][..], &grid].concat()));
    let (h1, rows1) = csv(&ok(&[&["predict", &first][..], &grid].concat()));
    let (h2, rows2) = csv(&ok(&[&["predict", &second][..], &grid].concat()));
    let system = col(&h, &rows, "system");
    let p1 = col(&h1, &rows1, "system");
    let p2 = col(&h2, &rows2, "system");
    assert_eq!(col(&h, &rows, "path_1"), p1);
    assert_eq!(col(&h, &rows, "path_2"), p2);
    for i in 0..system.len() {
        let want = 0.3 * p1[i] + 0.7 * p2[i];
        assert!((system[i] - want).abs() <= 1e-15, "row {i}: {} vs {want}", system[i]);
    }
}

#[test]
fn saved_system_predicts_like_its_configuration() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "sys.json", TWO_PATHS);
    let saved = write(&dir, "saved.json", &ok(&["compose", &config]));
    assert_eq!(
        ok(&["predict", &config, "--grid", "17"]),
        ok(&["predict", &saved, "--grid", "17"])
    );
}

#[test]
fn evolve_recomputes_only_the_touched_path() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "sys.json", TWO_PATHS);
    let saved = write(&dir, "saved.json", &ok(&["compose", &config]));
    let model = write(&dir, "a2.json", r#"{"v0": 50.0, "b": 6e-5, "end_of_test": 91208.0}"#);
    let out_path = dir.path().join("next.json");

    let out = run(&["evolve", &saved, "a", "--model", &model, "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("1 recomputed, 1 reused"), "{}", stderr(&out));

    let before: Value = serde_json::from_str(&fs::read_to_string(&saved).unwrap()).unwrap();
    let after: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(
        before["paths"][1]["model"].to_string(),
        after["paths"][1]["model"].to_string()
    );
    assert_ne!(before["paths"][0]["model"], after["paths"][0]["model"]);
    assert_eq!(after["components"]["a"]["v0"], 50.0);
}

#[test]
fn evolve_single_path_fixture() {
    let dir = TempDir::new().unwrap();
    let saved = write(&dir, "saved.json", &ok(&["compose", fixture().to_str().unwrap()]));
    let model = write(&dir, "c2.json", r#"{"v0": 60.0, "b": 3e-5, "end_of_test": 91208.0}"#);
    let out = run(&["evolve", &saved, "c2", "--model", &model]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("1 recomputed, 0 reused"));
    let next: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(next["components"]["c1"]["b"], 4.3553e-5);
}

#[test]
fn evolve_rejects_unknown_component() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.json", r#"{"v0": 60.0, "b": 3e-5, "end_of_test": 91208.0}"#);
    let out = run(&["evolve", fixture().to_str().unwrap(), "zz", "--model", &model]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown component `zz`"));
}

#[test]
fn fitting_a_failure_free_dataset_fails() {
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "quiet.csv", "# end_of_test=1000\n");
    let out = run(&["fit", &empty]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("failure-free component: unfittable"));
    assert!(out.stdout.is_empty());
}

fn simulated(dir: &TempDir, name: &str, v0: f64, b: f64, seed: u64) -> String {
    let spec = write(
        dir,
        &format!("{name}.spec.json"),
        &format!(r#"{{"v0": {v0:?}, "b": {b:?}, "end_of_test": 91208.0, "seed": {seed}}}"#),
    );
    write(dir, &format!("{name}.csv"), &ok(&["simulate", &spec]))
}

#[test]
fn fit_batches_one_document_per_dataset() {
    let dir = TempDir::new().unwrap();
    let files = [
        simulated(&dir, "c1", 69.0, 4.3553e-5, 1),
        simulated(&dir, "c2", 74.0, 2.7482e-5, 2),
        simulated(&dir, "c3", 120.0, 3e-5, 3),
    ];
    let out = ok(&["fit", &files[0], &files[1], &files[2]]);
    let docs: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(docs.len(), 3);
    let ids: Vec<&str> = docs.iter().map(|d| d["component_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["c1", "c2", "c3"]);

    let table = ok(&["fit", "--format", "csv", &files[0], &files[1], &files[2]]);
    assert_eq!(table.lines().next(), Some("component_id,v0,b,end_of_test,failures"));
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn fit_recovers_simulated_parameters() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, "big", 4000.0, 4.3553e-5, 5);
    let doc: Value = serde_json::from_str(ok(&["fit", &data]).trim()).unwrap();
    let v0 = doc["v0"].as_f64().unwrap();
    let b = doc["b"].as_f64().unwrap();
    assert!((v0 / 4000.0 - 1.0).abs() < 0.05, "v0 = {v0}");
    assert!((b / 4.3553e-5 - 1.0).abs() < 0.05, "b = {b}");
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "s.json", r#"{"v0": 69.0, "b": 4.3553e-5, "end_of_test": 91208.0, "seed": 9}"#);
    assert_eq!(ok(&["simulate", &spec]), ok(&["simulate", &spec]));
    assert_ne!(ok(&["simulate", &spec]), ok(&["simulate", &spec, "--seed", "10"]));
}

#[test]
fn compare_orders_the_late_curves() {
    let f = fixture();
    let (h, rows) = csv(&ok(&["compare", f.to_str().unwrap(), "--grid", "129"]));
    let tau = col(&h, &rows, "tau");
    let ma = col(&h, &rows, "mu_ma");
    let nhpp = col(&h, &rows, "mu_nhpp");
    let add = col(&h, &rows, "mu_additive");
    for i in 0..tau.len() {
        if tau[i] >= 5000.0 {
            assert!(ma[i] > nhpp[i], "tau={}", tau[i]);
        }
        // the additive curve starts steeper and only drops below later
        if tau[i] >= 27000.0 {
            assert!(nhpp[i] > add[i], "tau={}", tau[i]);
        }
    }
    for name in ["r_ma", "r_nhpp", "r_additive"] {
        assert_eq!(col(&h, &rows, name)[0], 1.0);
    }
}

#[test]
fn compare_agrees_with_itself_for_one_component() {
    let dir = TempDir::new().unwrap();
    let config = write(
        &dir,
        "one.json",
        r#"{
  "components": {"only": {"v0": 142.0, "b": 3.48e-5, "end_of_test": 91208.0}},
  "paths": [{"components": ["only"], "probability": 1.0, "last_failure_time": 88682.0}],
  "system_last_failure": 88682.0,
  "baseline": {"v0": 142.0, "b": 3.48e-5, "end_of_test": 91208.0}
}"#,
    );
    let (h, rows) = csv(&ok(&["compare", &config, "--grid", "65"]));
    for q in ["mu", "r"] {
        let nhpp = col(&h, &rows, &format!("{q}_nhpp"));
        for other in ["ma", "additive"] {
            let v = col(&h, &rows, &format!("{q}_{other}"));
            for (a, b) in v.iter().zip(&nhpp) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{q}_{other}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn compare_json_carries_the_deviation_summary() {
    let f = fixture();
    let out = run(&["compare", f.to_str().unwrap(), "--grid", "9", "--format", "json"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let dev = doc["max_abs_deviation"].as_object().unwrap();
    assert_eq!(dev.len(), 6);
    assert!(dev["r_ma-r_nhpp"].as_f64().unwrap() < dev["r_nhpp-r_additive"].as_f64().unwrap());
    assert_eq!(doc["series"].as_array().unwrap().len(), 6);
    assert!(stderr(&out).contains("max |r_ma-r_nhpp| = "));
}

#[test]
fn compare_baseline_flags_override_the_configuration() {
    let f = fixture();
    let from_config = ok(&["compare", f.to_str().unwrap(), "--grid", "9"]);
    let from_flags = ok(&[
        "compare", f.to_str().unwrap(), "--grid", "9", "--baseline-v0", "142", "--baseline-b", "3.48e-5",
    ]);
    assert_eq!(from_config, from_flags);
    let other = ok(&[
        "compare", f.to_str().unwrap(), "--grid", "9", "--baseline-v0", "150", "--baseline-b", "3.48e-5",
    ]);
    assert_ne!(from_config, other);
}

#[test]
fn compare_without_baseline_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let config = write(&dir, "sys.json", TWO_PATHS);
    let out = run(&["compare", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("needs a baseline"));
}

#[test]
fn precision_variable_limits_digits() {
    let f = fixture();
    let out = run_env(&["predict", f.to_str().unwrap(), "--grid", "2"], &[("RELICOMP_PRECISION", "4")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().nth(1), Some("0.000e0,1.000e0,1.000e0"));

    let json = run_env(
        &["predict", f.to_str().unwrap(), "--grid", "2", "--format", "json"],
        &[("RELICOMP_PRECISION", "2")],
    );
    let doc: Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(doc["series"][0]["values"][1], 0.0018);

    let bad = run_env(&["predict", f.to_str().unwrap()], &[("RELICOMP_PRECISION", "many")]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn exit_codes_separate_input_from_numerical_failures() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["predict", "/nonexistent/system.json"]).status.code(), Some(2));
    let broken = write(&dir, "broken.json", "{ not json");
    assert_eq!(run(&["predict", &broken]).status.code(), Some(2));
    let bad_sum = write(&dir, "sum.json", &TWO_PATHS.replace("0.7", "0.6"));
    let out = run(&["predict", &bad_sum]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sum to"));

    // every normalized time underflows to zero, so the score never turns
    // negative and the bracket search runs off the end of the floats
    let tiny = write(&dir, "tiny.csv", "# end_of_test=1e300\n1e-300\n2e-300\n");
    let out = run(&["fit", &tiny]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn model_commands_refuse_csv() {
    let f = fixture();
    assert_eq!(run(&["compose", f.to_str().unwrap(), "--format", "csv"]).status.code(), Some(2));
}
