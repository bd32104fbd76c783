use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class_f1: Vec<f64>,
    /// `confusion[true][pred]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Confusion matrix, per-class F1 (0 when precision + recall = 0), their
/// unweighted mean and accuracy.
pub fn evaluate(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape("evaluate predictions", y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput("evaluation labels"));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: n_classes,
                });
            }
        }
        confusion[t][p] += 1;
    }
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let per_class_f1: Vec<f64> = (0..n_classes)
        .map(|c| {
            let tp = confusion[c][c] as f64;
            let predicted: usize = (0..n_classes).map(|t| confusion[t][c]).sum();
            let actual: usize = confusion[c].iter().sum();
            let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
            let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
            if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            }
        })
        .collect();
    Ok(Metrics {
        macro_f1: per_class_f1.iter().sum::<f64>() / n_classes as f64,
        accuracy: correct as f64 / y_true.len() as f64,
        per_class_f1,
        confusion,
    })
}
