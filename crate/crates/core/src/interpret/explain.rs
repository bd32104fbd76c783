use std::fmt::Write as _;

use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::FeatureDictionary;
use crate::error::{Error, Result};
use crate::matrix::{argmax, softmax_rows};
use crate::merged::MergedModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub j: usize,
    pub code: f64,
    /// `W'[c, j]` for the predicted class.
    pub weight: f64,
    /// `weight × code` for the predicted class.
    pub contribution: f64,
    /// Contribution to every class logit.
    pub contributions: Vec<f64>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub instance: String,
    pub predicted_class: usize,
    pub predicted_label: String,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    /// Bias of every class.
    pub base: Vec<f64>,
    /// Active features only, by |contribution| to the predicted class.
    pub terms: Vec<Term>,
}

impl LocalExplanation {
    /// `base_c + Σ contributions_c − logit_c`, largest magnitude over classes.
    pub fn additivity_error(&self) -> f64 {
        (0..self.logits.len())
            .map(|c| {
                let sum: f64 = self.terms.iter().map(|t| t.contributions[c]).sum();
                (self.base[c] + sum - self.logits[c]).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn explain_codes(
    m: &MergedModel,
    dict: &FeatureDictionary,
    codes: ArrayView1<f64>,
    instance: String,
    class_names: &[String],
) -> LocalExplanation {
    let n_classes = m.n_classes();
    let codes2 = codes.insert_axis(Axis(0));
    let logits = m.logits_from_codes(&codes2);
    let probs = softmax_rows(&logits);
    let pred = argmax(logits.row(0));
    let mut terms: Vec<Term> = (0..codes.len())
        .filter(|&j| codes[j] > 0.0)
        .map(|j| {
            let contributions: Vec<f64> = (0..n_classes).map(|c| m.head_w[[c, j]] * codes[j]).collect();
            Term {
                j,
                code: codes[j],
                weight: m.head_w[[pred, j]],
                contribution: contributions[pred],
                contributions,
                text: dict.label(j),
            }
        })
        .collect();
    terms.sort_by(|a, b| {
        b.contribution
            .abs()
            .total_cmp(&a.contribution.abs())
            .then(a.j.cmp(&b.j))
    });
    LocalExplanation {
        instance,
        predicted_class: pred,
        predicted_label: class_names
            .get(pred)
            .cloned()
            .unwrap_or_else(|| pred.to_string()),
        logits: logits.row(0).to_vec(),
        probs: probs.row(0).to_vec(),
        base: m.head_b.to_vec(),
        terms,
    }
}

pub fn explain_instance(
    m: &MergedModel,
    dict: &FeatureDictionary,
    x: ArrayView1<f64>,
    instance: impl Into<String>,
    class_names: &[String],
) -> Result<LocalExplanation> {
    let codes = m.codes(&x.insert_axis(Axis(0)))?;
    if codes.ncols() != dict.d_hid {
        return Err(Error::shape("dictionary width", codes.ncols(), dict.d_hid));
    }
    Ok(explain_codes(m, dict, codes.row(0), instance.into(), class_names))
}

pub fn explain_batch(
    m: &MergedModel,
    dict: &FeatureDictionary,
    x: &ArrayView2<f64>,
    ids: &[String],
    class_names: &[String],
) -> Result<Vec<LocalExplanation>> {
    if ids.len() != x.nrows() {
        return Err(Error::shape("explanation ids", x.nrows(), ids.len()));
    }
    let codes = m.codes(x)?;
    if codes.ncols() != dict.d_hid {
        return Err(Error::shape("dictionary width", codes.ncols(), dict.d_hid));
    }
    Ok(codes
        .outer_iter()
        .zip(ids)
        .map(|(c, id)| explain_codes(m, dict, c, id.clone(), class_names))
        .collect())
}

/// Plain-text rendering; every printed number carries 8 decimals so the
/// printed contributions sum to the printed logit to within 1e-6.
pub fn render_explanation(e: &LocalExplanation) -> String {
    let c = e.predicted_class;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "instance {}: predicted {} (p = {:.4})",
        e.instance, e.predicted_label, e.probs[c]
    );
    let _ = writeln!(s, "logit {:+.8}", e.logits[c]);
    let _ = writeln!(s, "  {:+.8}  base", e.base[c]);
    for t in &e.terms {
        let _ = writeln!(s, "  {:+.8}  [f{}] {} (code {:.4})", t.contribution, t.j, t.text, t.code);
    }
    if e.terms.is_empty() {
        let _ = writeln!(s, "  no active features; prediction is the bias alone");
    }
    s
}
