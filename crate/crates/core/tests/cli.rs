use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrt"))
        .args(["--quiet", "--threads", "1"])
        .args(args)
        .output()
        .expect("run rrt")
}

fn ok(args: &[&str]) -> Value {
    let out = rrt(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn code(args: &[&str]) -> i32 {
    rrt(args).status.code().expect("exit code")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn read_json(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn tangent_pipeline_scores_against_truth() {
    let d = tempfile::tempdir().unwrap();
    let (ph, data, rec) = (p(d.path(), "t.json"), p(d.path(), "t.rrt"), p(d.path(), "r.rrt"));
    let summary = ok(&["phantom", "--family", "tangent", "--m", "1", "--k", "0", "--out", &ph]);
    assert_eq!(summary["family"], "tangent");
    ok(&["forward", "--family", "tangent", "--phantom", &ph, "--out", &data, "--band-limit", "1", "--n-lambda", "24"]);
    let res = ok(&[
        "invert", "--family", "tangent", "--data", &data, "--out", &rec, "--truth", &ph, "--n-fft", "64", "--n-r", "21",
        "--csv-slice", "m=1",
    ]);
    let l2 = res["global"]["rel_l2"].as_f64().unwrap();
    assert!(l2 < 1e-5, "{l2}");
    let metrics = read_json(res["metrics"].as_str().unwrap());
    assert_eq!(metrics["family"], "tangent");
    assert_eq!(metrics["modes"].as_array().unwrap().len(), 4);
    let csv = std::fs::read_to_string(format!("{rec}.slice.csv")).unwrap();
    assert!(csv.starts_with("m,k,r,re,im"));
    assert_eq!(csv.lines().count(), 1 + 3 * 21);
}

#[test]
fn equidistant_and_pencil_pipelines_run() {
    let d = tempfile::tempdir().unwrap();
    let (ph, data, rec) = (p(d.path(), "e.json"), p(d.path(), "e.rrt"), p(d.path(), "er.rrt"));
    ok(&["phantom", "--family", "equidistant", "--n", "1", "--real", "--out", &ph]);
    ok(&["forward", "--family", "equidistant", "--phantom", &ph, "--out", &data, "--n-lambda", "64", "--n-s", "64"]);
    let res = ok(&[
        "invert", "--family", "equidistant", "--data", &data, "--out", &rec, "--truth", &ph, "--omega", "30", "--h", "0.25",
        "--field-r", "8", "--field-tau", "8",
    ]);
    assert!(res["global"]["rel_l2"].as_f64().unwrap().is_finite());

    let (ph, data, rec) = (p(d.path(), "p.json"), p(d.path(), "p.rrt"), p(d.path(), "pr.rrt"));
    ok(&["phantom", "--family", "pencil", "--out", &ph]);
    ok(&["forward", "--family", "pencil", "--phantom", &ph, "--out", &data, "--grid", "4", "--beam", "24"]);
    let res = ok(&["invert", "--family", "pencil", "--data", &data, "--out", &rec, "--truth", &ph]);
    assert!(res["global"]["rel_l2"].as_f64().unwrap() < 1.0);
    let manifest = read_json(&format!("{rec}.manifest.json"));
    assert!(manifest.is_object() || manifest.is_array());
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let d = tempfile::tempdir().unwrap();
    let (ph, data) = (p(d.path(), "e.json"), p(d.path(), "e.rrt"));
    ok(&["phantom", "--family", "equidistant", "--out", &ph]);
    // Family mismatch and bad flags are validation errors.
    assert_eq!(code(&["forward", "--family", "tangent", "--phantom", &ph, "--out", &data]), 2);
    assert_eq!(code(&["phantom", "--family", "cone", "--out", &ph]), 2);
    assert_eq!(code(&["selftest", "--suite", "nope"]), 2);
    // Missing files and unreadable containers are I/O or format errors.
    assert_eq!(code(&["forward", "--family", "tangent", "--phantom", &p(d.path(), "none.json"), "--out", &data]), 3);
    std::fs::write(&data, b"not a container").unwrap();
    assert_eq!(code(&["invert", "--family", "equidistant", "--data", &data, "--out", &p(d.path(), "x.rrt")]), 3);
    assert_eq!(rrt_core::cli::EXIT_SELFTEST, 5);
}

#[test]
fn invert_rejects_data_of_another_family() {
    let d = tempfile::tempdir().unwrap();
    let (ph, data) = (p(d.path(), "t.json"), p(d.path(), "t.rrt"));
    ok(&["phantom", "--family", "tangent", "--out", &ph]);
    ok(&["forward", "--family", "tangent", "--phantom", &ph, "--out", &data, "--band-limit", "1", "--n-lambda", "8"]);
    assert_eq!(code(&["invert", "--family", "equidistant", "--data", &data, "--out", &p(d.path(), "x.rrt")]), 2);
}

#[test]
fn config_file_overrides_flags() {
    let d = tempfile::tempdir().unwrap();
    let (cfg, ph) = (p(d.path(), "c.json"), p(d.path(), "t.json"));
    std::fs::write(&cfg, r#"{"m": 2, "k": -1, "coeffs": "0:0.6,2:-0.2,-2:-0.2"}"#).unwrap();
    ok(&["--config", &cfg, "phantom", "--family", "tangent", "--m", "1", "--out", &ph]);
    let doc = read_json(&ph);
    let mode = &doc["modes"][0];
    assert_eq!(mode["m"], 2);
    assert_eq!(mode["k"], -1);
    std::fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    assert_eq!(code(&["--config", &cfg, "phantom", "--family", "tangent", "--out", &ph]), 2);
    std::fs::write(&cfg, "[1, 2]").unwrap();
    assert_eq!(code(&["--config", &cfg, "phantom", "--family", "tangent", "--out", &ph]), 2);
}

#[test]
fn selftest_prints_a_passing_report() {
    let d = tempfile::tempdir().unwrap();
    let report = p(d.path(), "st.json");
    let v = ok(&["selftest", "--suite", "specfun", "--report", &report]);
    assert_eq!(v["pass"], true);
    assert_eq!(v["suite"], "specfun");
    assert!(!v["checks"].as_array().unwrap().is_empty());
    assert_eq!(read_json(&report), v);
}
