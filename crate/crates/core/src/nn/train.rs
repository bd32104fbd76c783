use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::optim::{Adam, Params};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l1_lambda: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-3,
            l1_lambda: 1e-5,
            dropout: 0.1,
            batch_size: 128,
            max_epochs: 200,
            patience: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.l1_lambda >= 0.0) {
            return Err(Error::Config("l1_lambda must be non-negative".into()));
        }
        if !(0.0..=0.5).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 0.5]".into()));
        }
        if self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size and patience must be positive".into()));
        }
        Ok(())
    }
}

/// A borrowed design matrix with its labels.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub x: &'a Array2<f64>,
    pub y: &'a [usize],
}

impl<'a> Labeled<'a> {
    pub fn new(x: &'a Array2<f64>, y: &'a [usize]) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: Mlp,
    /// Epoch 0 is the initialization checkpoint.
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Step 1: initialise an MLP with `hidden` widths and train it with
/// cross-entropy plus L1 on every weight.
pub fn train_mlp(
    hidden: &[usize],
    n_classes: usize,
    train: Labeled<'_>,
    val: Labeled<'_>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let mut rng = seed::rng(seed::derive(cfg.seed, "mlp-init", 0));
    let init = Mlp::new(train.x.ncols(), hidden, n_classes, &mut rng)?;
    fit_from(init, train, val, cfg)
}

/// Mini-batch Adam from a given initialization, keeping the checkpoint with
/// the lowest validation objective (same objective as training, evaluated
/// without dropout). Stops after `patience` epochs without improvement.
pub fn fit_from(
    init: Mlp,
    train: Labeled<'_>,
    val: Labeled<'_>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train.y.is_empty() || val.y.is_empty() {
        return Err(Error::EmptyInput("training or validation split"));
    }
    let mut model = init;
    let init_val = model.loss(&val.x.view(), val.y, cfg.l1_lambda)?;
    let init_train = model.loss(&train.x.view(), train.y, cfg.l1_lambda)?;
    if !init_val.is_finite() || !init_train.is_finite() {
        return Err(Error::TrainingDiverged { epoch: 0 });
    }
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: init_train,
        val_loss: init_val,
    }];
    let mut best = (model.clone(), 0usize, init_val);
    let mut stale = 0usize;

    let mut opt = Adam::for_params(cfg.learning_rate, &model);
    let mut shuffle_rng = seed::rng(seed::derive(cfg.seed, "mlp-shuffle", 0));
    let mut dropout_rng = seed::rng(seed::derive(cfg.seed, "mlp-dropout", 0));
    let mut order: Vec<usize> = (0..train.y.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = train.x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| train.y[i]).collect();
            let (loss, grads) = model.loss_and_grad_dropout(
                &xb.view(),
                &yb,
                cfg.l1_lambda,
                cfg.dropout,
                Some(&mut dropout_rng),
            )?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            total += loss * chunk.len() as f64;
            opt.step(model.param_slices_mut(), grads.slices());
        }
        let val_loss = model.loss(&val.x.view(), val.y, cfg.l1_lambda)?;
        if !val_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_loss: total / train.y.len() as f64,
            val_loss,
        });
        if val_loss < best.2 {
            best = (model.clone(), epoch, val_loss);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    Ok(TrainReport {
        model: best.0,
        history,
        best_epoch: best.1,
        best_val_loss: best.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Two Gaussian-ish blobs separated along the diagonal.
    fn blobs(n: usize, seed_: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = seed::rng(seed_);
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % 2;
            let centre = if c == 0 { -1.5 } else { 1.5 };
            x[[i, 0]] = centre + rng.gen_range(-1.0..1.0);
            x[[i, 1]] = centre + rng.gen_range(-1.0..1.0);
            y.push(c);
        }
        (x, y)
    }

    /// Perceptron convergence doubles as the separability oracle.
    fn perceptron_separates(x: &Array2<f64>, y: &[usize]) -> bool {
        let mut w = [0.0f64; 3];
        for _ in 0..1000 {
            let mut errors = 0;
            for (row, &c) in x.outer_iter().zip(y) {
                let t = if c == 1 { 1.0 } else { -1.0 };
                let s = w[0] * row[0] + w[1] * row[1] + w[2];
                if t * s <= 0.0 {
                    w[0] += t * row[0];
                    w[1] += t * row[1];
                    w[2] += t;
                    errors += 1;
                }
            }
            if errors == 0 {
                return true;
            }
        }
        false
    }

    #[test]
    fn learns_separable_blobs() {
        let (x, y) = blobs(200, 11);
        assert!(perceptron_separates(&x, &y));
        let (xv, yv) = blobs(60, 12);
        let cfg = TrainConfig {
            l1_lambda: 0.0,
            dropout: 0.0,
            learning_rate: 1e-2,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let r = train_mlp(&[8], 2, Labeled::new(&x, &y), Labeled::new(&xv, &yv), &cfg).unwrap();
        let pred = r.model.predict(&x.view()).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / 200.0;
        assert!(acc >= 0.99, "accuracy {acc}");
    }

    #[test]
    fn dominant_l1_shrinks_weights() {
        let (x, y) = blobs(100, 3);
        let (xv, yv) = blobs(40, 4);
        let cfg = TrainConfig {
            l1_lambda: 10.0,
            max_epochs: 30,
            ..TrainConfig::default()
        };
        let mut rng = seed::rng(seed::derive(cfg.seed, "mlp-init", 0));
        let init = Mlp::new(2, &[8], 2, &mut rng).unwrap();
        let before = init.mean_abs_weight();
        let r = fit_from(init, Labeled::new(&x, &y), Labeled::new(&xv, &yv), &cfg).unwrap();
        assert!(r.model.mean_abs_weight() < before);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (x, y) = blobs(20, 5);
        let cfg = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        let mut rng = seed::rng(seed::derive(cfg.seed, "mlp-init", 0));
        let init = Mlp::new(2, &[4], 2, &mut rng).unwrap();
        let r = train_mlp(&[4], 2, Labeled::new(&x, &y), Labeled::new(&x, &y), &cfg).unwrap();
        assert_eq!(r.model, init);
        assert_eq!(r.best_epoch, 0);
    }

    #[test]
    fn best_checkpoint_has_lowest_recorded_val_loss_and_is_deterministic() {
        let (x, y) = blobs(120, 8);
        let (xv, yv) = blobs(40, 9);
        let cfg = TrainConfig {
            max_epochs: 40,
            patience: 5,
            ..TrainConfig::default()
        };
        let a = train_mlp(&[6, 4], 2, Labeled::new(&x, &y), Labeled::new(&xv, &yv), &cfg).unwrap();
        for rec in &a.history {
            assert!(a.best_val_loss <= rec.val_loss);
        }
        let b = train_mlp(&[6, 4], 2, Labeled::new(&x, &y), Labeled::new(&xv, &yv), &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = TrainConfig {
            dropout: 0.9,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn non_finite_loss_reports_divergence() {
        let (x, mut y) = blobs(40, 2);
        y.iter_mut().for_each(|v| *v %= 2);
        let mut big = x.clone();
        big[[3, 0]] = f64::NAN;
        let cfg = TrainConfig::default();
        let err = train_mlp(&[4], 2, Labeled::new(&big, &y), Labeled::new(&big, &y), &cfg);
        assert!(matches!(err, Err(Error::TrainingDiverged { .. })));
    }
}
