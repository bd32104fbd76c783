#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use xnntab::experiment::ExperimentConfig;
use xnntab::nn::TrainConfig;
use xnntab::sae::SaeTrainConfig;
use xnntab::seed;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn data_dir() -> PathBuf {
    repo_root().join("data")
}

pub fn scratch(name: &str) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&p);
    fs::create_dir_all(&p).unwrap();
    p
}

/// Mixed-type table with a rule-generated label. `classes` is 2 or 3.
pub fn write_synthetic(dir: &Path, n: usize, classes: usize, root: u64) -> (PathBuf, PathBuf) {
    let mut rng = seed::rng(root);
    let colors = ["red", "green", "blue"];
    let sizes = ["small", "medium", "large"];
    let mut csv = String::from("id,x1,x2,color,size,label\n");
    for i in 0..n {
        let x1: f64 = rng.gen_range(0.0..10.0);
        let x2: f64 = rng.gen_range(-5.0..5.0);
        let color = colors[rng.gen_range(0..3)];
        let size = rng.gen_range(0..3);
        let label = if classes == 2 {
            let yes = (x1 > 6.0 && color != "blue") || (size == 2 && x2 < -1.0);
            if yes { "yes" } else { "no" }
        } else if x1 < 3.5 {
            "low"
        } else if x1 < 7.0 || color == "green" {
            "mid"
        } else {
            "high"
        };
        writeln!(csv, "{i},{x1:.4},{x2:.4},{color},{},{label}", sizes[size]).unwrap();
    }
    let schema = r#"{"columns": [
        {"name": "id", "kind": "drop"},
        {"name": "x1", "kind": "numeric"},
        {"name": "x2", "kind": "numeric"},
        {"name": "color", "kind": "nominal"},
        {"name": "size", "kind": "ordinal", "ordinal_order": ["small", "medium", "large"]},
        {"name": "label", "kind": "label"}
    ]}"#;
    let data = dir.join("synthetic.csv");
    let schema_path = dir.join("synthetic.schema.json");
    fs::write(&data, csv).unwrap();
    fs::write(&schema_path, schema).unwrap();
    (data, schema_path)
}

/// A few seconds per run: two trials, short training.
pub fn smoke_config(dir: &Path, classes: usize, root: u64) -> ExperimentConfig {
    let (dataset, schema) = write_synthetic(dir, 300, classes, root);
    ExperimentConfig {
        dataset,
        schema,
        hidden: Some(vec![16, 8]),
        ratio: Some(2),
        mlp: TrainConfig {
            max_epochs: 40,
            patience: 8,
            batch_size: 32,
            ..TrainConfig::default()
        },
        sae: SaeTrainConfig {
            max_epochs: 60,
            patience: 10,
            batch_size: 32,
            ..SaeTrainConfig::default()
        },
        trials: 2,
        baseline_trials: 2,
        explanations: 3,
        seed: root,
        out: dir.join("run"),
        ..ExperimentConfig::default()
    }
}

pub fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    println!("{} [{id:>2}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}
