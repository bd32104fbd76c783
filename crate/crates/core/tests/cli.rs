mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

use common::{scratch, smoke_config};

fn xnntab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xnntab"))
        .args(args)
        .env("XNNTAB_THREADS", "2")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Config file for a small synthetic run, written next to its data.
fn config_file(dir: &Path) -> PathBuf {
    let cfg = smoke_config(dir, 2, 21);
    let path = dir.join("exp.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn run_once() -> &'static (PathBuf, PathBuf) {
    static RUN: OnceLock<(PathBuf, PathBuf)> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = scratch("cli-run");
        let cfg = config_file(&dir);
        let out = dir.join("a");
        let o = xnntab(&["run", "--config", s(&cfg), "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (dir, out)
    })
}

fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("seconds");
            map.remove("out");
            map.values_mut().for_each(strip_timings);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn run_is_deterministic_per_seed() {
    let (dir, a) = run_once();
    let b = dir.join("b");
    let o = xnntab(&["run", "--config", s(&dir.join("exp.json")), "--out", s(&b)]);
    assert!(o.status.success());
    let (mut ma, mut mb) = (manifest(a), manifest(&b));
    strip_timings(&mut ma);
    strip_timings(&mut mb);
    assert_eq!(ma, mb);
    for k in 0..5 {
        for f in ["merged.json", "dictionary.json", "lr.json", "dt.json"] {
            let fa = fs::read(a.join(format!("fold-{k}/{f}"))).unwrap();
            let fb = fs::read(b.join(format!("fold-{k}/{f}"))).unwrap();
            assert_eq!(fa, fb, "fold-{k}/{f}");
        }
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("xnntab") && stdout.contains("manifest"));
}

#[test]
fn aggregate_is_the_mean_of_the_folds() {
    let (_, out) = run_once();
    let m = manifest(out);
    let folds = m["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 5);
    for model in ["xnntab", "mlp", "lr", "dt"] {
        let v: Vec<f64> = folds
            .iter()
            .map(|f| f["result"][model]["macro_f1"].as_f64().unwrap())
            .collect();
        let mean = v.iter().sum::<f64>() / 5.0;
        let got = m["aggregate"]["macro_f1"][model]["mean"].as_f64().unwrap();
        assert!((got - mean).abs() < 1e-15, "{model}: {got} vs {mean}");
    }
    assert!(m["note"].as_str().unwrap().len() > 10);
}

#[test]
fn different_seed_changes_the_run() {
    let (dir, a) = run_once();
    let c = dir.join("c");
    let o = xnntab(&["run", "--config", s(&dir.join("exp.json")), "--out", s(&c), "--seed", "99"]);
    assert!(o.status.success());
    assert_ne!(manifest(a)["folds"], manifest(&c)["folds"]);
}

fn instance_rows(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(dir.join("synthetic.csv")).unwrap();
    let rows: Vec<&str> = text.lines().take(4).collect();
    let p = dir.join("rows.csv");
    fs::write(&p, rows.join("\n") + "\n").unwrap();
    p
}

#[test]
fn explain_prints_additive_text_and_json() {
    let (dir, out) = run_once();
    let rows = instance_rows(dir);
    let json = dir.join("explained.json");
    let o = xnntab(&[
        "explain",
        "--model",
        s(&out.join("fold-0/merged.json")),
        "--dict",
        s(&out.join("fold-0/dictionary.json")),
        "--row",
        s(&rows),
        "--out",
        s(&json),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);

    // each block: "logit L", then signed contributions summing to L
    let mut blocks = 0;
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        if let Some(l) = lines[i].strip_prefix("logit ") {
            let logit: f64 = l.trim().parse().unwrap();
            let mut sum = 0.0;
            i += 1;
            while i < lines.len() && lines[i].starts_with("  ") {
                if let Some(v) = lines[i].split_whitespace().next().and_then(|t| t.parse::<f64>().ok()) {
                    sum += v;
                }
                i += 1;
            }
            assert!((sum - logit).abs() <= 1e-6, "{sum} vs {logit}");
            blocks += 1;
        } else {
            i += 1;
        }
    }
    assert_eq!(blocks, 3);
    let v: Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn explain_refuses_mismatched_artifacts() {
    let (dir, out) = run_once();
    let rows = instance_rows(dir);
    let o = xnntab(&[
        "explain",
        "--model",
        s(&out.join("fold-0/merged.json")),
        "--dict",
        s(&out.join("fold-1/dictionary.json")),
        "--row",
        s(&rows),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    let m = manifest(out);
    let id0 = m["folds"][0]["result"]["ids"]["merged"].as_str().unwrap();
    let id1 = m["folds"][1]["result"]["ids"]["merged"].as_str().unwrap();
    assert!(err.contains(id0) && err.contains(id1), "{err}");
}

#[test]
fn explain_rejects_wrong_artifact_kind() {
    let (dir, out) = run_once();
    let rows = instance_rows(dir);
    let o = xnntab(&[
        "explain",
        "--model",
        s(&out.join("fold-0/lr.json")),
        "--dict",
        s(&out.join("fold-0/dictionary.json")),
        "--row",
        s(&rows),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn report_regenerates_bundles() {
    let (_, out) = run_once();
    let report = out.join("fold-2/report");
    fs::remove_dir_all(&report).unwrap();
    let o = xnntab(&["report", "--run", s(out), "--explanations", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["rules.md", "rules.json", "stats.json", "heatmap.csv", "sweep.json", "sweep.csv", "heatmap.svg"] {
        assert!(report.join(f).exists(), "{f}");
    }
    let sweep: Value = serde_json::from_str(&fs::read_to_string(report.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep.as_array().unwrap().len(), 5);
    let heat = fs::read_to_string(report.join("heatmap.csv")).unwrap();
    let lines: Vec<&str> = heat.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1].split(',').count(), 1 + 16);
    assert_eq!(fs::read_dir(report.join("explanations")).unwrap().count(), 2);
}

#[test]
fn report_on_incomplete_run_fails() {
    let dir = scratch("cli-incomplete");
    let o = xnntab(&["report", "--run", s(&dir)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn evaluate_scores_every_artifact_kind() {
    let (dir, out) = run_once();
    for f in ["merged.json", "lr.json", "dt.json"] {
        let o = xnntab(&[
            "evaluate",
            "--model",
            s(&out.join(format!("fold-0/{f}"))),
            "--data",
            s(&dir.join("synthetic.csv")),
        ]);
        assert!(o.status.success(), "{f}: {}", String::from_utf8_lossy(&o.stderr));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["n"], 300);
        let f1 = v["metrics"]["macro_f1"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f1));
    }
}

#[test]
fn preprocess_writes_encoding_and_folds() {
    let dir = scratch("cli-preprocess");
    let (data, schema) = common::write_synthetic(&dir, 120, 3, 4);
    let out = dir.join("pre");
    let o = xnntab(&["preprocess", "--data", s(&data), "--schema", s(&schema), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let encoded = fs::read_to_string(out.join("encoded.csv")).unwrap();
    assert_eq!(encoded.lines().count(), 121);
    // x1, x2, three colour indicators, size rank, label
    assert_eq!(encoded.lines().next().unwrap().split(',').count(), 7);
    for f in ["encoder.json", "col_map.json", "folds.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn config_errors_exit_with_1() {
    let dir = scratch("cli-bad-config");
    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{"dataset": "x.csv", "schema": "x.json", "no_such_field": 1}"#).unwrap();
    assert_eq!(xnntab(&["run", "--config", s(&bad)]).status.code(), Some(1));
    assert_eq!(xnntab(&["run"]).status.code(), Some(1));

    let cfg = config_file(&dir);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v["hidden"] = serde_json::json!([8, 0]);
    fs::write(&cfg, v.to_string()).unwrap();
    assert_eq!(xnntab(&["run", "--config", s(&cfg)]).status.code(), Some(1));
}
