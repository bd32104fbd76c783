use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{fold_dir, write_fold_report, RunManifest};
use crate::artifact::{Artifact, DtArtifact, Kind, LogRegArtifact, MergedArtifact};
use crate::data::{encode, load_dataset, make_folds, read_rows, FoldSet, Schema};
use crate::error::{Error, Result};
use crate::interpret::{explain_batch, FeatureDictionary, LocalExplanation};
use crate::nn::{evaluate, Metrics};
use crate::seed;

/// Explain every row of a CSV file with a merged model and its dictionary.
pub fn cmd_explain(model: &Path, dict: &Path, rows: &Path) -> Result<Vec<LocalExplanation>> {
    let m = Artifact::<MergedArtifact>::load(model)?;
    let d = Artifact::<FeatureDictionary>::load(dict)?;
    d.require_parent("model", &m.id)?;
    let raw = read_rows(fs::File::open(rows)?, &m.payload.schema, false)?;
    if raw.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let (x, _, _) = m.payload.preprocessor.transform(&raw)?;
    let ids: Vec<String> = (0..raw.n_rows()).map(|i| format!("row-{i}")).collect();
    explain_batch(
        &m.payload.model,
        &d.payload,
        &x.view(),
        &ids,
        &m.payload.preprocessor.class_names,
    )
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|_| Error::IncompleteRun(format!("missing {}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rebuild every fold's report bundle from the saved artifacts.
pub fn cmd_report(run: &Path, n_explanations: usize) -> Result<Vec<PathBuf>> {
    let manifest: RunManifest = read_json(&run.join("manifest.json"))?;
    let folds: FoldSet = read_json(&run.join("folds.json"))?;
    if let Some(bad) = manifest.folds.iter().find(|f| !f.ok) {
        return Err(Error::IncompleteRun(format!("fold {} did not finish", bad.fold)));
    }
    if manifest.folds.len() != folds.folds.len() {
        return Err(Error::IncompleteRun("manifest and folds.json disagree".into()));
    }
    let cfg: &ExperimentConfig = &manifest.config;
    let mut out = Vec::new();
    let mut cache: Option<(Schema, crate::data::RawDataset)> = None;
    for (k, fold) in folds.folds.iter().enumerate() {
        let dir = fold_dir(run, k);
        let need = |name: &str| {
            let p = dir.join(name);
            if p.exists() {
                Ok(p)
            } else {
                Err(Error::IncompleteRun(format!("missing {}", p.display())))
            }
        };
        let m = Artifact::<MergedArtifact>::load(need("merged.json")?)?;
        let d = Artifact::<FeatureDictionary>::load(need("dictionary.json")?)?;
        d.require_parent("model", &m.id)?;
        if cache.as_ref().is_none_or(|(s, _)| *s != m.payload.schema) {
            let raw = load_dataset(&cfg.dataset, &m.payload.schema)?;
            cache = Some((m.payload.schema.clone(), raw));
        }
        let raw = &cache.as_ref().expect("loaded above").1;
        let (x, _, _) = m.payload.preprocessor.transform(raw)?;
        let x_test = x.select(ndarray::Axis(0), &fold.test);
        let ids: Vec<String> = fold.test.iter().map(|i| format!("row-{i}")).collect();
        let report_dir = dir.join("report");
        write_fold_report(
            &report_dir,
            &m.payload.model,
            &d.payload,
            &x_test.view(),
            &ids,
            &m.payload.preprocessor.class_names,
            n_explanations,
        )?;
        out.push(report_dir);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub format: String,
    pub id: String,
    pub n: usize,
    pub metrics: Metrics,
}

fn peek_format(path: &Path) -> Result<String> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(v.get("format")
        .and_then(|f| f.as_str())
        .unwrap_or("<none>")
        .to_string())
}

/// Score a saved predictor on a labelled CSV file.
pub fn cmd_evaluate(model: &Path, data: &Path, schema: Option<&Path>) -> Result<Evaluation> {
    let format = peek_format(model)?;
    let run = |sch: &Schema, enc: &crate::data::Encoder, predict: &dyn Fn(&ndarray::Array2<f64>) -> Result<Vec<usize>>| -> Result<(usize, Metrics)> {
        let sch = match schema {
            Some(p) => Schema::from_json_file(p)?,
            None => sch.clone(),
        };
        let raw = load_dataset(data, &sch)?;
        let ds = enc.transform_dataset(&raw)?;
        let pred = predict(&ds.x)?;
        Ok((ds.y.len(), evaluate(&ds.y, &pred, ds.n_classes())?))
    };
    let (id, (n, metrics)) = match format.as_str() {
        f if f == MergedArtifact::FORMAT => {
            let a = Artifact::<MergedArtifact>::load(model)?;
            let p = &a.payload;
            (a.id.clone(), run(&p.schema, &p.preprocessor, &|x| Ok(p.model.predict(&x.view())?.classes()))?)
        }
        f if f == LogRegArtifact::FORMAT => {
            let a = Artifact::<LogRegArtifact>::load(model)?;
            let p = &a.payload;
            (a.id.clone(), run(&p.schema, &p.preprocessor, &|x| p.model.predict(&x.view()))?)
        }
        f if f == DtArtifact::FORMAT => {
            let a = Artifact::<DtArtifact>::load(model)?;
            let p = &a.payload;
            (a.id.clone(), run(&p.schema, &p.preprocessor, &|x| p.model.predict(&x.view()))?)
        }
        _ => {
            return Err(Error::Format {
                expected: format!(
                    "{} | {} | {}",
                    MergedArtifact::FORMAT,
                    LogRegArtifact::FORMAT,
                    DtArtifact::FORMAT
                ),
                found: format,
            })
        }
    };
    Ok(Evaluation { format, id, n, metrics })
}

/// Encode a dataset (transform fitted on all rows) and write the folds.
pub fn cmd_preprocess(data: &Path, schema: &Path, out: &Path, root_seed: u64) -> Result<FoldSet> {
    let schema = Schema::from_json_file(schema)?;
    let raw = load_dataset(data, &schema)?;
    let all: Vec<usize> = (0..raw.n_rows()).collect();
    let enc = encode(&raw, &all)?;
    let folds = make_folds(raw.n_rows(), &enc.y, seed::derive(root_seed, "folds", 0))?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("encoded.csv"))?;
    let header: Vec<String> = enc
        .col_map
        .iter()
        .map(|c| match &c.role {
            crate::data::EncodingRole::Onehot { category } => format!("{}={}", c.source, category),
            _ => c.source.clone(),
        })
        .chain(std::iter::once("label".to_string()))
        .collect();
    w.write_record(&header)?;
    for (row, &y) in enc.x.outer_iter().zip(&enc.y) {
        w.write_record(
            row.iter()
                .map(|v| v.to_string())
                .chain(std::iter::once(enc.class_names[y].clone())),
        )?;
    }
    w.flush()?;
    fs::write(out.join("encoder.json"), serde_json::to_string_pretty(&enc.encoder)?)?;
    fs::write(out.join("col_map.json"), serde_json::to_string_pretty(&enc.col_map)?)?;
    fs::write(out.join("folds.json"), serde_json::to_string(&folds)?)?;
    Ok(folds)
}
