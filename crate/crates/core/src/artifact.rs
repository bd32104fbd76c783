//! Versioned JSON artifacts. Each file carries a format tag, a content
//! hash id, and the ids of the artifacts it was derived from.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::LogRegModel;
use crate::data::{Encoder, Schema};
use crate::error::{Error, Result};
use crate::interpret::FeatureDictionary;
use crate::merged::MergedModel;
use crate::nn::Mlp;
use crate::rules::DecisionTree;
use crate::sae::Sae;

pub trait Kind: Serialize + DeserializeOwned {
    const FORMAT: &'static str;
}

impl Kind for Mlp {
    const FORMAT: &'static str = "xnntab-mlp-v1";
}

impl Kind for Sae {
    const FORMAT: &'static str = "xnntab-sae-v1";
}

impl Kind for FeatureDictionary {
    const FORMAT: &'static str = "xnntab-dictionary-v1";
}

/// The merged predictor together with the preprocessing it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedArtifact {
    pub model: MergedModel,
    pub schema: Schema,
    pub preprocessor: Encoder,
}

impl Kind for MergedArtifact {
    const FORMAT: &'static str = "xnntab-merged-v1";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegArtifact {
    pub model: LogRegModel,
    pub schema: Schema,
    pub preprocessor: Encoder,
}

impl Kind for LogRegArtifact {
    const FORMAT: &'static str = "xnntab-lr-v1";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtArtifact {
    pub model: DecisionTree,
    pub schema: Schema,
    pub preprocessor: Encoder,
}

impl Kind for DtArtifact {
    const FORMAT: &'static str = "xnntab-dt-v1";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub format: String,
    pub id: String,
    /// Role → id of the artifacts this one was built from.
    #[serde(default)]
    pub parents: BTreeMap<String, String>,
    pub payload: T,
}

fn content_id(format: &str, parents: &BTreeMap<String, String>, payload: &serde_json::Value) -> Result<String> {
    let mut h = Sha256::new();
    h.update(format.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(parents)?);
    h.update([0]);
    h.update(serde_json::to_vec(payload)?);
    Ok(hex::encode(&h.finalize()[..8]))
}

impl<T: Kind> Artifact<T> {
    pub fn new(payload: T, parents: BTreeMap<String, String>) -> Result<Self> {
        let value = serde_json::to_value(&payload)?;
        Ok(Self {
            format: T::FORMAT.to_string(),
            id: content_id(T::FORMAT, &parents, &value)?,
            parents,
            payload,
        })
    }

    pub fn with_parent(payload: T, role: &str, parent: &str) -> Result<Self> {
        Self::new(payload, BTreeMap::from([(role.to_string(), parent.to_string())]))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    /// Load and check the format tag and the content id.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let raw: serde_json::Value = serde_json::from_str(&text)?;
        let found = raw
            .get("format")
            .and_then(|v| v.as_str())
            .unwrap_or("<none>")
            .to_string();
        if found != T::FORMAT {
            return Err(Error::Format {
                expected: T::FORMAT.to_string(),
                found,
            });
        }
        let a: Self = serde_json::from_value(raw)?;
        let id = content_id(&a.format, &a.parents, &serde_json::to_value(&a.payload)?)?;
        if id != a.id {
            return Err(Error::Provenance {
                expected: a.id,
                found: id,
            });
        }
        Ok(a)
    }

    /// Fail unless `role` names `expected` as its parent.
    pub fn require_parent(&self, role: &str, expected: &str) -> Result<()> {
        match self.parents.get(role) {
            Some(id) if id == expected => Ok(()),
            other => Err(Error::Provenance {
                expected: expected.to_string(),
                found: other.cloned().unwrap_or_else(|| "<none>".into()),
            }),
        }
    }
}
