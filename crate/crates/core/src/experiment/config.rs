use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpret::SemanticsConfig;
use crate::nn::TrainConfig;
use crate::sae::SaeTrainConfig;

/// Published architecture for a dataset key: hidden widths and SAE ratio.
pub fn preset(key: &str) -> Option<(Vec<usize>, usize)> {
    Some(match key.to_ascii_lowercase().as_str() {
        "ch" | "ad" => (vec![100, 64, 32], 2),
        "cr" => (vec![174, 180, 19], 3),
        "sb" => (vec![96, 179, 5], 2),
        "ge" => (vec![128, 64, 32], 2),
        "co" => (vec![169, 175], 1),
        "ca" => (vec![106, 44], 2),
        _ => return None,
    })
}

/// Ranges sampled by the random search. The log-uniform range is for the
/// L1 coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub learning_rate: (f64, f64),
    pub dropout: (f64, f64),
    pub l1_lambda: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: (5e-3, 1e-2),
            dropout: (0.0, 0.5),
            l1_lambda: (1e-7, 1e-2),
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ok(self.learning_rate) || !ok(self.dropout) || !ok(self.l1_lambda) {
            return Err(Error::Config("search ranges must be finite with low ≤ high".into()));
        }
        if self.learning_rate.0 <= 0.0 || self.l1_lambda.0 <= 0.0 {
            return Err(Error::Config("learning-rate and L1 ranges must be positive".into()));
        }
        if self.dropout.0 < 0.0 || self.dropout.1 >= 1.0 {
            return Err(Error::Config("dropout range must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    /// Dataset key selecting a published architecture.
    pub preset: Option<String>,
    /// Overrides the preset widths.
    pub hidden: Option<Vec<usize>>,
    /// Overrides the preset SAE ratio.
    pub ratio: Option<usize>,
    pub alpha: f64,
    /// Hyperparameters of the first trial; later trials resample
    /// learning rate, dropout and L1 from `search`.
    pub mlp: TrainConfig,
    pub sae: SaeTrainConfig,
    pub search: SearchSpace,
    pub semantics: SemanticsConfig,
    pub trials: usize,
    pub baseline_trials: usize,
    /// Explanations written per fold (first test instances).
    pub explanations: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            schema: PathBuf::new(),
            preset: None,
            hidden: None,
            ratio: None,
            alpha: 1e-3,
            mlp: TrainConfig::default(),
            sae: SaeTrainConfig::default(),
            search: SearchSpace::default(),
            semantics: SemanticsConfig::default(),
            trials: 100,
            baseline_trials: 20,
            explanations: 10,
            seed: 0,
            out: PathBuf::from("runs/out"),
        }
    }
}

impl ExperimentConfig {
    /// Read a JSON config; relative data paths resolve against its folder.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset, &mut cfg.schema] {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Hidden widths and SAE ratio after applying preset and overrides.
    pub fn architecture(&self) -> Result<(Vec<usize>, usize)> {
        let from_preset = match &self.preset {
            Some(k) => Some(preset(k).ok_or_else(|| Error::Config(format!("unknown preset `{k}`")))?),
            None => None,
        };
        let hidden = self
            .hidden
            .clone()
            .or_else(|| from_preset.as_ref().map(|p| p.0.clone()))
            .ok_or_else(|| Error::Config("set `preset` or `hidden`".into()))?;
        let ratio = self
            .ratio
            .or(from_preset.as_ref().map(|p| p.1))
            .unwrap_or(2);
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive and non-empty".into()));
        }
        if ratio == 0 {
            return Err(Error::Config("SAE ratio must be positive".into()));
        }
        Ok((hidden, ratio))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.as_os_str().is_empty() || self.schema.as_os_str().is_empty() {
            return Err(Error::Config("`dataset` and `schema` are required".into()));
        }
        self.architecture()?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be a non-negative number".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.mlp.validate()?;
        self.search.validate()?;
        self.semantics.validate()?;
        if let Some(p) = self
            .semantics
            .p_candidates
            .iter()
            .find(|p| !crate::interpret::DEFAULT_P.contains(p))
        {
            return Err(Error::Config(format!(
                "p candidate {p} is not one of 50, 60, 70, 80, 90"
            )));
        }
        Ok(())
    }
}
