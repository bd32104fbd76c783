use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SearchSpace};
use crate::artifact::{Artifact, DtArtifact, LogRegArtifact, MergedArtifact};
use crate::baselines::{train_dt, tune_logreg, LogRegConfig};
use crate::data::{encode, load_dataset, make_folds, EncodedDataset, Fold, FoldSet, RawDataset, Schema};
use crate::error::{Error, Result};
use crate::interpret::{
    collect_activations, explain_batch, global_report, select_threshold_or_empty, write_bundle,
    write_heatmap_svg, write_sweep_csv, FeatureDictionary, GlobalReport, SemanticsConfig, Summary,
};
use crate::merged::{composed_logits, MergedModel};
use crate::nn::{evaluate, finetune_head, train_mlp, Labeled, Metrics, TrainConfig};
use crate::rules::TreeParams;
use crate::sae::{train_sae, Sae};
use crate::seed;

pub const CAVEAT: &str = "Scores come from stratified 5-fold cross-validation (65/15/20 train/validation/test). \
Published results for other tabular models often use a single split averaged over several seeds, \
so they are not directly comparable with these numbers.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactIds {
    pub mlp: String,
    pub sae: String,
    pub merged: String,
    pub dictionary: String,
    pub lr: String,
    pub dt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub sizes: SplitSizes,
    pub ids: ArtifactIds,
    /// Step-1 MLP, before fine-tuning.
    pub mlp: Metrics,
    /// Merged interpretable model.
    pub xnntab: Metrics,
    pub lr: Metrics,
    pub dt: Metrics,
    pub best_trial: usize,
    pub mlp_config: TrainConfig,
    pub mlp_val_macro_f1: f64,
    pub mlp_best_epoch: usize,
    pub sae_best_epoch: usize,
    pub finetune_best_epoch: usize,
    pub lr_config: LogRegConfig,
    pub dt_params: TreeParams,
    pub chosen_p: u32,
    pub n_labeled: usize,
    pub n_dead: usize,
    pub n_uncovered: usize,
    /// Set when no p produced a rule; the dictionary is then empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantics_note: Option<String>,
    pub rule_length: Option<Summary>,
    pub active_per_decision: Option<Summary>,
    /// Worst `|base + Σ contributions − logit|` over all test instances.
    pub additivity_max_error: f64,
    /// Worst `|merged − composed|` logit gap over the test split.
    pub merge_max_error: f64,
    pub unseen_categories: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<FoldResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population standard deviation.
    pub fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Model name → macro F1 over folds.
    pub macro_f1: BTreeMap<String, MeanStd>,
    pub accuracy: BTreeMap<String, MeanStd>,
    /// Mean of the per-fold averages.
    pub avg_active_features: f64,
    pub max_active_features: f64,
    /// Mean of the per-fold averages over folds with labeled features.
    pub avg_rule_length: Option<f64>,
    pub max_rule_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub folds: Vec<FoldRecord>,
    /// Present only when every fold succeeded.
    pub aggregate: Option<Aggregate>,
    pub note: String,
    pub seconds: f64,
}

pub const MODELS: [&str; 4] = ["xnntab", "mlp", "lr", "dt"];

impl RunManifest {
    pub fn aggregate_of(folds: &[FoldRecord]) -> Option<Aggregate> {
        let results: Vec<&FoldResult> = folds.iter().filter_map(|f| f.result.as_ref()).collect();
        if results.len() != folds.len() || results.is_empty() {
            return None;
        }
        let pick = |name: &str, r: &FoldResult| -> Metrics {
            match name {
                "xnntab" => r.xnntab.clone(),
                "mlp" => r.mlp.clone(),
                "lr" => r.lr.clone(),
                _ => r.dt.clone(),
            }
        };
        let mut macro_f1 = BTreeMap::new();
        let mut accuracy = BTreeMap::new();
        for m in MODELS {
            let f: Vec<f64> = results.iter().map(|r| pick(m, r).macro_f1).collect();
            let a: Vec<f64> = results.iter().map(|r| pick(m, r).accuracy).collect();
            macro_f1.insert(m.to_string(), MeanStd::of(&f));
            accuracy.insert(m.to_string(), MeanStd::of(&a));
        }
        let act: Vec<&Summary> = results.iter().filter_map(|r| r.active_per_decision.as_ref()).collect();
        let len: Vec<&Summary> = results.iter().filter_map(|r| r.rule_length.as_ref()).collect();
        Some(Aggregate {
            macro_f1,
            accuracy,
            avg_active_features: act.iter().map(|s| s.avg).sum::<f64>() / act.len().max(1) as f64,
            max_active_features: act.iter().map(|s| s.max).fold(0.0, f64::max),
            avg_rule_length: (!len.is_empty()).then(|| len.iter().map(|s| s.avg).sum::<f64>() / len.len() as f64),
            max_rule_length: (!len.is_empty()).then(|| len.iter().map(|s| s.max).fold(0.0, f64::max)),
        })
    }
}

pub fn fold_dir(out: &Path, k: usize) -> PathBuf {
    out.join(format!("fold-{k}"))
}

/// Trial 0 is the configured MLP; later trials resample the search space.
pub fn trial_config(base: &TrainConfig, space: &SearchSpace, fold_seed: u64, t: usize) -> TrainConfig {
    let seed = seed::derive(fold_seed, "trial", t as u64);
    if t == 0 {
        return TrainConfig { seed, ..base.clone() };
    }
    let mut rng = seed::rng(seed::derive(seed, "sample", 0));
    let (ll, lh) = space.l1_lambda;
    TrainConfig {
        learning_rate: rng.gen_range(space.learning_rate.0..=space.learning_rate.1),
        dropout: rng.gen_range(space.dropout.0..=space.dropout.1),
        l1_lambda: (rng.gen_range(ll.ln()..=lh.ln())).exp(),
        seed,
        ..base.clone()
    }
}

struct Split {
    x: Array2<f64>,
    y: Vec<usize>,
}

impl Split {
    fn of(enc: &EncodedDataset, idx: &[usize]) -> Self {
        let (x, y) = enc.rows(idx);
        Self { x, y }
    }

    fn labeled(&self) -> Labeled<'_> {
        Labeled::new(&self.x, &self.y)
    }
}

pub fn semantics_for(cfg: &ExperimentConfig, fold_seed: u64) -> SemanticsConfig {
    let mut s = cfg.semantics.clone();
    s.skope.seed = seed::derive(fold_seed, "skope", 0);
    s
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (u, v)| m.max((u - v).abs()))
}

/// Steps 1 to 4, rule mining, baselines and reports for fold `k`.
pub fn run_fold(
    cfg: &ExperimentConfig,
    schema: &Schema,
    raw: &RawDataset,
    fold: &Fold,
    k: usize,
    dir: &Path,
) -> Result<FoldResult> {
    let start = Instant::now();
    let (hidden, ratio) = cfg.architecture()?;
    let fold_seed = seed::derive(cfg.seed, "fold", k as u64);
    let enc = encode(raw, &fold.train)?;
    let c = enc.n_classes();
    let train = Split::of(&enc, &fold.train);
    let val = Split::of(&enc, &fold.val);
    let test = Split::of(&enc, &fold.test);

    // Step 1 with random search on validation macro F1.
    let trials: Vec<(usize, TrainConfig)> = (0..cfg.trials)
        .map(|t| (t, trial_config(&cfg.mlp, &cfg.search, fold_seed, t)))
        .collect();
    let fitted: Vec<(usize, TrainConfig, crate::nn::TrainReport, f64)> = trials
        .into_par_iter()
        .map(|(t, tc)| {
            let rep = train_mlp(&hidden, c, train.labeled(), val.labeled(), &tc)?;
            let f1 = evaluate(&val.y, &rep.model.predict(&val.x.view())?, c)?.macro_f1;
            Ok((t, tc, rep, f1))
        })
        .collect::<Result<_>>()?;
    let (best_trial, mlp_cfg, mlp_rep, mlp_val_f1) = fitted
        .into_iter()
        .reduce(|a, b| if b.3 > a.3 { b } else { a })
        .expect("trials ≥ 1");
    let mlp = mlp_rep.model;

    // Step 2.
    let h_train = mlp.represent(&train.x.view())?;
    let h_val = mlp.represent(&val.x.view())?;
    let sae_cfg = crate::sae::SaeTrainConfig {
        alpha: cfg.alpha,
        seed: seed::derive(fold_seed, "sae", 0),
        ..cfg.sae.clone()
    };
    let sae_rep = train_sae(&h_train, &h_val, ratio, &sae_cfg)?;
    let sae: Sae = sae_rep.sae;

    // Step 3.
    let ft_cfg = TrainConfig {
        seed: seed::derive(fold_seed, "finetune", 0),
        ..mlp_cfg.clone()
    };
    let ft = finetune_head(&mlp, &sae, train.labeled(), val.labeled(), &ft_cfg)?;
    let tuned = ft.model;

    // Step 4.
    let merged = MergedModel::new(&tuned, &sae)?;
    let pred = merged.predict(&test.x.view())?;
    let merge_max_error = max_abs_diff(&pred.logits, &composed_logits(&tuned, &sae, &test.x.view())?);
    let xnntab = evaluate(&test.y, &pred.classes(), c)?;
    let mlp_metrics = evaluate(&test.y, &mlp.predict(&test.x.view())?, c)?;

    // Semantics on the training split.
    let acts = collect_activations(&merged, &train.x.view())?;
    let sem = semantics_for(cfg, fold_seed);
    let (dictionary, labeled) = select_threshold_or_empty(&acts, &train.x.view(), &enc.col_map, &sem)?;
    let semantics_note = (!labeled).then(|| "no p produced a rule; every feature is unlabeled".to_string());

    // Baselines.
    let (lr, lr_config) = tune_logreg(train.labeled(), val.labeled(), c, cfg.baseline_trials, fold_seed)?;
    let lr_metrics = evaluate(&test.y, &lr.predict(&test.x.view())?, c)?;
    let (dt, dt_params) = train_dt(train.labeled(), val.labeled(), c, cfg.baseline_trials, fold_seed)?;
    let dt_metrics = evaluate(&test.y, &dt.predict(&test.x.view())?, c)?;

    // Artifacts.
    fs::create_dir_all(dir)?;
    let mlp_art = Artifact::new(mlp.clone(), BTreeMap::new())?;
    mlp_art.save(dir.join("mlp.json"))?;
    let sae_art = Artifact::with_parent(sae.clone(), "mlp", &mlp_art.id)?;
    sae_art.save(dir.join("sae.json"))?;
    let merged_art = Artifact::new(
        MergedArtifact {
            model: merged.clone(),
            schema: schema.clone(),
            preprocessor: enc.encoder.clone(),
        },
        BTreeMap::from([
            ("mlp".to_string(), mlp_art.id.clone()),
            ("sae".to_string(), sae_art.id.clone()),
        ]),
    )?;
    merged_art.save(dir.join("merged.json"))?;
    let dict_art = Artifact::with_parent(dictionary.clone(), "model", &merged_art.id)?;
    dict_art.save(dir.join("dictionary.json"))?;
    let lr_art = Artifact::new(
        LogRegArtifact {
            model: lr,
            schema: schema.clone(),
            preprocessor: enc.encoder.clone(),
        },
        BTreeMap::new(),
    )?;
    lr_art.save(dir.join("lr.json"))?;
    let dt_art = Artifact::new(
        DtArtifact {
            model: dt,
            schema: schema.clone(),
            preprocessor: enc.encoder.clone(),
        },
        BTreeMap::new(),
    )?;
    dt_art.save(dir.join("dt.json"))?;

    // Reports.
    let ids: Vec<String> = fold.test.iter().map(|i| format!("row-{i}")).collect();
    let (report, additivity_max_error) = write_fold_report(
        &dir.join("report"),
        &merged,
        &dictionary,
        &test.x.view(),
        &ids,
        &enc.class_names,
        cfg.explanations,
    )?;

    Ok(FoldResult {
        sizes: SplitSizes {
            train: fold.train.len(),
            val: fold.val.len(),
            test: fold.test.len(),
        },
        ids: ArtifactIds {
            mlp: mlp_art.id,
            sae: sae_art.id,
            merged: merged_art.id,
            dictionary: dict_art.id,
            lr: lr_art.id,
            dt: dt_art.id,
        },
        mlp: mlp_metrics,
        xnntab,
        lr: lr_metrics,
        dt: dt_metrics,
        best_trial,
        mlp_config: mlp_cfg,
        mlp_val_macro_f1: mlp_val_f1,
        mlp_best_epoch: mlp_rep.best_epoch,
        sae_best_epoch: sae_rep.best_epoch,
        finetune_best_epoch: ft.best_epoch,
        lr_config,
        dt_params,
        chosen_p: dictionary.chosen_p,
        n_labeled: dictionary.features.len(),
        n_dead: dictionary.dead.len(),
        n_uncovered: dictionary.uncovered.len(),
        semantics_note,
        rule_length: report.rule_length,
        active_per_decision: report.active_per_decision,
        additivity_max_error,
        merge_max_error,
        unseen_categories: enc.unseen_categories,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Explain every test instance, write the first `n_explanations` and the
/// global report bundle. Returns the report and the worst additivity error.
pub fn write_fold_report(
    dir: &Path,
    merged: &MergedModel,
    dictionary: &FeatureDictionary,
    x_test: &ArrayView2<f64>,
    ids: &[String],
    class_names: &[String],
    n_explanations: usize,
) -> Result<(GlobalReport, f64)> {
    let explanations = explain_batch(merged, dictionary, x_test, ids, class_names)?;
    let additivity = explanations
        .iter()
        .map(|e| e.additivity_error())
        .fold(0.0, f64::max);
    let report = global_report(merged, dictionary, x_test, class_names)?;
    write_bundle(
        dir,
        &report,
        dictionary,
        &explanations[..n_explanations.min(explanations.len())],
    )?;
    write_sweep_csv(&dir.join("sweep.csv"), &report.sweep)?;
    write_heatmap_svg(&dir.join("heatmap.svg"), &report)?;
    Ok((report, additivity))
}

/// Load the dataset and build the folds of a run.
pub fn prepare(cfg: &ExperimentConfig) -> Result<(Schema, RawDataset, FoldSet)> {
    let schema = Schema::from_json_file(&cfg.schema)?;
    let raw = load_dataset(&cfg.dataset, &schema)?;
    let all: Vec<usize> = (0..raw.n_rows()).collect();
    let y = encode(&raw, &all)?.y;
    let folds = make_folds(raw.n_rows(), &y, seed::derive(cfg.seed, "folds", 0))?;
    Ok((schema, raw, folds))
}

/// Run every fold, write artifacts and the manifest. The manifest is
/// written even when folds fail; the run then reports `FoldsFailed`.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let (schema, raw, folds) = prepare(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    fs::write(cfg.out.join("folds.json"), serde_json::to_string(&folds)?)?;

    let records: Vec<FoldRecord> = folds
        .folds
        .par_iter()
        .enumerate()
        .map(|(k, fold)| {
            let dir = fold_dir(&cfg.out, k);
            let rec = match run_fold(cfg, &schema, &raw, fold, k, &dir) {
                Ok(result) => FoldRecord {
                    fold: k,
                    ok: true,
                    error: None,
                    result: Some(result),
                },
                Err(e) => FoldRecord {
                    fold: k,
                    ok: false,
                    error: Some(e.to_string()),
                    result: None,
                },
            };
            if let Ok(text) = serde_json::to_string_pretty(&rec) {
                let _ = fs::create_dir_all(&dir).and_then(|_| fs::write(dir.join("fold.json"), text));
            }
            rec
        })
        .collect();

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        aggregate: RunManifest::aggregate_of(&records),
        folds: records,
        note: CAVEAT.to_string(),
        seconds: start.elapsed().as_secs_f64(),
    };
    fs::write(cfg.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    let failed = manifest.folds.iter().filter(|f| !f.ok).count();
    if failed > 0 {
        return Err(Error::FoldsFailed {
            failed,
            total: manifest.folds.len(),
        });
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_zero_is_the_base_config() {
        let base = TrainConfig::default();
        let t0 = trial_config(&base, &SearchSpace::default(), 7, 0);
        assert_eq!(t0.learning_rate, base.learning_rate);
        for t in 1..50 {
            let c = trial_config(&base, &SearchSpace::default(), 7, t);
            assert!((5e-3..=1e-2).contains(&c.learning_rate));
            assert!((0.0..=0.5).contains(&c.dropout));
            assert!(c.l1_lambda >= 1e-7 * (1.0 - 1e-12) && c.l1_lambda <= 1e-2 * (1.0 + 1e-12));
            assert_eq!(c, trial_config(&base, &SearchSpace::default(), 7, t));
        }
    }

    #[test]
    fn mean_std() {
        let s = MeanStd::of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.mean, 3.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
    }
}
