//! Logistic regression and decision-tree baselines trained under the same
//! folds as the main model.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{affine, argmax, log_sum_exp, serde_array1, serde_array2, softmax_rows};
use crate::nn::{evaluate, Labeled};
use crate::optim::Params;
use crate::rules::{fit_tree, DecisionTree, TreeParams};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// C × d.
    #[serde(with = "serde_array2")]
    pub w: Array2<f64>,
    #[serde(with = "serde_array1")]
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    /// Initial full-batch step.
    pub learning_rate: f64,
    pub max_iter: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            max_iter: 150,
        }
    }
}

impl Params for LogRegModel {
    fn param_slices(&self) -> Vec<&[f64]> {
        vec![
            self.w.as_slice().expect("standard layout"),
            self.b.as_slice().expect("standard layout"),
        ]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w.as_slice_mut().expect("standard layout"),
            self.b.as_slice_mut().expect("standard layout"),
        ]
    }
}

impl LogRegModel {
    pub fn zeros(d: usize, n_classes: usize) -> Self {
        Self {
            w: Array2::zeros((n_classes, d)),
            b: Array1::zeros(n_classes),
        }
    }

    fn check(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.w.ncols() {
            return Err(Error::shape("logistic regression input", self.w.ncols(), x.ncols()));
        }
        Ok(())
    }

    pub fn logits(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        Ok(affine(x, &self.w, &self.b))
    }

    pub fn predict_proba(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(softmax_rows(&self.logits(x)?))
    }

    pub fn predict(&self, x: &ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(self.logits(x)?.outer_iter().map(argmax).collect())
    }

    /// Mean cross-entropy.
    pub fn loss(&self, x: &ArrayView2<f64>, y: &[usize]) -> Result<f64> {
        let z = self.logits(x)?;
        let n = y.len() as f64;
        Ok(z
            .outer_iter()
            .zip(y)
            .map(|(row, &c)| log_sum_exp(row) - row[c])
            .sum::<f64>()
            / n)
    }

    /// Loss and gradient `(dW, db)`.
    pub fn loss_and_grad(&self, x: &ArrayView2<f64>, y: &[usize]) -> Result<(f64, Array2<f64>, Array1<f64>)> {
        let z = self.logits(x)?;
        let n = y.len() as f64;
        let loss = z
            .outer_iter()
            .zip(y)
            .map(|(row, &c)| log_sum_exp(row) - row[c])
            .sum::<f64>()
            / n;
        let mut delta = softmax_rows(&z);
        for (i, &c) in y.iter().enumerate() {
            delta[[i, c]] -= 1.0;
        }
        delta /= n;
        let gw = delta.t().dot(x);
        let gb = delta.sum_axis(Axis(0));
        Ok((loss, gw, gb))
    }
}

/// Full-batch accelerated gradient descent from zero weights. Each
/// iteration takes a gradient step from the momentum point, halving the
/// step until the sufficient-decrease test passes; momentum restarts
/// whenever the loss would rise.
pub fn train_logreg(train: Labeled<'_>, n_classes: usize, cfg: &LogRegConfig) -> Result<LogRegModel> {
    if train.y.is_empty() {
        return Err(Error::EmptyInput("logistic regression training split"));
    }
    if let Some(&bad) = train.y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            classes: n_classes,
        });
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("logistic regression learning_rate must be positive".into()));
    }
    let x = train.x.view();
    let mut model = LogRegModel::zeros(x.ncols(), n_classes);
    let mut prev = model.clone();
    let mut loss = model.loss(&x, train.y)?;
    let mut step = cfg.learning_rate;
    let mut t = 1.0f64;
    for it in 0..cfg.max_iter {
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch: it });
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let look = LogRegModel {
            w: &model.w + &((&model.w - &prev.w) * beta),
            b: &model.b + &((&model.b - &prev.b) * beta),
        };
        let (look_loss, gw, gb) = look.loss_and_grad(&x, train.y)?;
        let g2 = gw.iter().chain(gb.iter()).map(|v| v * v).sum::<f64>();
        let mut next = None;
        for _ in 0..60 {
            let cand = LogRegModel {
                w: &look.w - &(&gw * step),
                b: &look.b - &(&gb * step),
            };
            let l = cand.loss(&x, train.y)?;
            if l.is_finite() && l <= look_loss - 0.5 * step * g2 {
                next = Some((cand, l));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, l)) = next else { break };
        if l > loss {
            // restart from the current iterate without momentum
            prev = model.clone();
            t = 1.0;
            continue;
        }
        prev = std::mem::replace(&mut model, cand);
        loss = l;
        t = t_next;
        step *= 1.25;
    }
    if !loss.is_finite() || model.w.iter().any(|v| !v.is_finite()) {
        return Err(Error::TrainingDiverged { epoch: cfg.max_iter });
    }
    Ok(model)
}

/// Maximum relative error of the analytic gradient.
pub fn logreg_gradient_check(model: &LogRegModel, x: &ArrayView2<f64>, y: &[usize]) -> Result<f64> {
    let (_, gw, gb) = model.loss_and_grad(x, y)?;
    let analytic: Vec<f64> = gw.iter().chain(gb.iter()).copied().collect();
    let mut probe = model.clone();
    Ok(crate::gradcheck::max_relative_error(
        &model.flat_params(),
        &analytic,
        |p| {
            probe.set_flat_params(p);
            probe.loss(x, y).expect("shapes fixed")
        },
    ))
}

/// Random search over `max_iter ∈ [100, 200]` by validation macro F1.
pub fn tune_logreg(
    train: Labeled<'_>,
    val: Labeled<'_>,
    n_classes: usize,
    trials: usize,
    root_seed: u64,
) -> Result<(LogRegModel, LogRegConfig)> {
    let mut rng = seed::rng(seed::derive(root_seed, "lr-search", 0));
    let mut best: Option<(f64, LogRegModel, LogRegConfig)> = None;
    for t in 0..trials.max(1) {
        let cfg = LogRegConfig {
            max_iter: if t == 0 { 150 } else { rng.gen_range(100..=200) },
            ..LogRegConfig::default()
        };
        let m = train_logreg(train, n_classes, &cfg)?;
        let f1 = evaluate(val.y, &m.predict(&val.x.view())?, n_classes)?.macro_f1;
        if best.as_ref().is_none_or(|b| f1 > b.0) {
            best = Some((f1, m, cfg));
        }
    }
    let (_, m, cfg) = best.expect("at least one trial");
    Ok((m, cfg))
}

pub const DT_DEPTHS: [usize; 4] = [5, 10, 15, 20];

/// Random search over depth {5, 10, 15, 20}, min_samples_split in
/// [2, 10] and min_samples_leaf in [1, 10] by validation macro F1.
pub fn train_dt(
    train: Labeled<'_>,
    val: Labeled<'_>,
    n_classes: usize,
    trials: usize,
    root_seed: u64,
) -> Result<(DecisionTree, TreeParams)> {
    let mut rng = seed::rng(seed::derive(root_seed, "dt-search", 0));
    let mut best: Option<(f64, DecisionTree, TreeParams)> = None;
    for t in 0..trials.max(1) {
        let params = if t == 0 {
            TreeParams {
                max_depth: 10,
                min_samples_split: 2,
                min_samples_leaf: 1,
            }
        } else {
            TreeParams {
                max_depth: DT_DEPTHS[rng.gen_range(0..DT_DEPTHS.len())],
                min_samples_split: rng.gen_range(2..=10),
                min_samples_leaf: rng.gen_range(1..=10),
            }
        };
        let tree = fit_tree(&train.x.view(), train.y, n_classes, &params)?;
        let f1 = evaluate(val.y, &tree.predict(&val.x.view())?, n_classes)?.macro_f1;
        if best.as_ref().is_none_or(|b| f1 > b.0) {
            best = Some((f1, tree, params));
        }
    }
    let (_, tree, params) = best.expect("at least one trial");
    Ok((tree, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn blobs(n: usize, s: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = seed::rng(s);
        let mut x = Array2::zeros((n, 2));
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        for i in 0..n {
            let c = if y[i] == 1 { 2.0 } else { -2.0 };
            x[[i, 0]] = c + rng.gen_range(-1.0..1.0);
            x[[i, 1]] = -c + rng.gen_range(-1.0..1.0);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs() {
        let (x, y) = blobs(200, 1);
        // |x0 - c| < 1 keeps the classes apart at x0 = 0, so they are separable
        let m = train_logreg(Labeled::new(&x, &y), 2, &LogRegConfig::default()).unwrap();
        let acc = m.predict(&x.view()).unwrap().iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(acc as f64 / 200.0 >= 0.99);
    }

    #[test]
    fn zero_iterations_give_uniform_probabilities() {
        let (x, y) = blobs(10, 2);
        let m = train_logreg(Labeled::new(&x, &y), 3, &LogRegConfig { max_iter: 0, ..Default::default() }).unwrap();
        assert!(m.w.iter().all(|&v| v == 0.0));
        let p = m.predict_proba(&x.view()).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seed::rng(9);
        let x = Array2::from_shape_fn((12, 4), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let m = LogRegModel {
            w: Array2::from_shape_fn((3, 4), |_| rng.gen_range(-1.0..1.0)),
            b: array![0.1, -0.2, 0.3],
        };
        assert!(logreg_gradient_check(&m, &x.view(), &y).unwrap() < 1e-4);
    }

    #[test]
    fn loss_never_increases() {
        let (x, y) = blobs(60, 3);
        let mut prev = f64::INFINITY;
        for it in [0, 1, 5, 20, 50] {
            let m = train_logreg(Labeled::new(&x, &y), 2, &LogRegConfig { max_iter: it, ..Default::default() }).unwrap();
            let l = m.loss(&x.view(), &y).unwrap();
            assert!(l <= prev + 1e-12);
            prev = l;
        }
    }

    #[test]
    fn dt_pure_and_xor() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let (t, _) = train_dt(Labeled::new(&x, &y), Labeled::new(&x, &y), 2, 3, 0).unwrap();
        assert_eq!(t.predict(&x.view()).unwrap(), y);
        let yp = [1, 1, 1, 1];
        let (t, _) = train_dt(Labeled::new(&x, &yp), Labeled::new(&x, &yp), 2, 1, 0).unwrap();
        assert_eq!(t.depth(), 0);
        assert_eq!(t.predict(&x.view()).unwrap(), yp);
    }
}
