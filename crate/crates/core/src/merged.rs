//! Step 4: the SAE decoder and the decision layer are both linear, so they
//! collapse into one head `W' = W·Mᵀ` that reads the sparse codes directly.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{affine, argmax, serde_array1, serde_array2, softmax_rows};
use crate::nn::{Dense, Mlp};
use crate::sae::Sae;

/// `(W·Mᵀ, c)` for `W` (C × d_in), `M` (d_hid × d_in); the bias is
/// carried through unchanged.
pub fn merge_head(w: &Array2<f64>, c: &Array1<f64>, m: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    if w.ncols() != m.ncols() {
        return Err(Error::shape("merge_head inner dimension", w.ncols(), m.ncols()));
    }
    if c.len() != w.nrows() {
        return Err(Error::shape("merge_head bias", w.nrows(), c.len()));
    }
    Ok((w.dot(&m.t()), c.clone()))
}

/// Frozen representation layers, SAE encoder and merged head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedModel {
    pub hidden: Vec<Dense>,
    #[serde(with = "serde_array2")]
    pub encoder_m: Array2<f64>,
    #[serde(with = "serde_array1")]
    pub encoder_b: Array1<f64>,
    /// W', (C × d_hid).
    #[serde(with = "serde_array2")]
    pub head_w: Array2<f64>,
    #[serde(with = "serde_array1")]
    pub head_b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct MergedPrediction {
    pub codes: Array2<f64>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
}

impl MergedPrediction {
    pub fn classes(&self) -> Vec<usize> {
        self.logits.outer_iter().map(argmax).collect()
    }
}

impl MergedModel {
    /// Build from a fine-tuned MLP and the SAE it was fine-tuned against.
    pub fn new(mlp: &Mlp, sae: &Sae) -> Result<Self> {
        if sae.d_in() != mlp.d_in() {
            return Err(Error::shape("SAE input vs penultimate width", mlp.d_in(), sae.d_in()));
        }
        let (head_w, head_b) = merge_head(&mlp.head.w, &mlp.head.b, &sae.m)?;
        Ok(Self {
            hidden: mlp.hidden.clone(),
            encoder_m: sae.m.clone(),
            encoder_b: sae.b.clone(),
            head_w,
            head_b,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .map_or(self.encoder_m.ncols(), Dense::inputs)
    }

    pub fn d_hid(&self) -> usize {
        self.encoder_m.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.head_w.nrows()
    }

    /// Dictionary codes `ReLU(M·g(x) + b)`.
    pub fn codes(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape("merged model input", self.input_dim(), x.ncols()));
        }
        let mut a = x.to_owned();
        for layer in &self.hidden {
            a = affine(&a.view(), &layer.w, &layer.b);
            a.mapv_inplace(|v| v.max(0.0));
        }
        let mut codes = affine(&a.view(), &self.encoder_m, &self.encoder_b);
        codes.mapv_inplace(|v| v.max(0.0));
        Ok(codes)
    }

    pub fn logits_from_codes(&self, codes: &ArrayView2<f64>) -> Array2<f64> {
        affine(codes, &self.head_w, &self.head_b)
    }

    pub fn predict(&self, x: &ArrayView2<f64>) -> Result<MergedPrediction> {
        let codes = self.codes(x)?;
        let logits = self.logits_from_codes(&codes.view());
        let probs = softmax_rows(&logits);
        Ok(MergedPrediction {
            codes,
            logits,
            probs,
        })
    }
}

/// Logits of the un-merged path `W·(Mᵀ·codes) + c`.
pub fn composed_logits(mlp: &Mlp, sae: &Sae, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let recon = sae.reconstruct(&mlp.represent(x)?.view())?;
    Ok(affine(&recon.view(), &mlp.head.w, &mlp.head.b))
}
