mod common;

use common::{faultgan, pipeline_differences, run_pipeline};

#[test]
fn reruns_are_byte_identical() {
    let diffs = pipeline_differences();
    assert!(diffs.is_empty(), "differing artifacts: {diffs:?}");
}

#[test]
fn every_output_has_an_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let names = run_pipeline(dir.path());
    for out in ["train.csv", "test.csv", "model.txt", "svm.txt", "report.json", "group.json", "sweep.json"] {
        assert!(names.contains(&format!("{out}.config.json")), "no config beside {out}");
    }
    let text = std::fs::read_to_string(dir.path().join("model.txt.config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["settings"]["train"]["seed"], 7);
    assert_eq!(v["settings"]["train"]["prior"], "orthogonal");
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("true normal") && report.contains("true fault"));
    let group: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("group.json")).unwrap()).unwrap();
    assert!(group["body"]["threshold"].as_f64().unwrap() > 0.0);
    assert!(group["body"]["reject"].is_boolean());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(faultgan(d, &["--help"]).0, 0);
    assert_eq!(faultgan(d, &["--version"]).0, 0);
    assert_eq!(faultgan(d, &["frobnicate"]).0, 1);
    assert_eq!(faultgan(d, &["simulate", "--bogus-flag"]).0, 1);
    let (code, err) = faultgan(d, &["detect", "--model", "missing.txt", "--data", "x.csv", "--out", "r.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("missing.txt"));
    std::fs::write(d.join("old.txt"), r#"{"format":"faultgan","version":99,"kind":"ganae-model","body":{}}"#).unwrap();
    std::fs::write(d.join("x.csv"), "t,u0,u1,y0,y1,y2,label\n").unwrap();
    let (code, err) = faultgan(d, &["detect", "--model", "old.txt", "--data", "x.csv", "--out", "r.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("version 99"), "{err}");
}
