//! Tied-weight sparse autoencoder over the penultimate representation.
//!
//! The encoder is `ReLU(M·h + b)`; the decoder is `Mᵀ` with no bias. Only
//! `M` and `b` are stored, so the decoder cannot drift from the encoder.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{affine, relu_inplace, serde_array1, serde_array2};
use crate::optim::{Adam, Params};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sae {
    /// Encoder matrix, (d_hid × d_in).
    #[serde(with = "serde_array2")]
    pub m: Array2<f64>,
    #[serde(with = "serde_array1")]
    pub b: Array1<f64>,
    pub ratio: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaeTrainConfig {
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for SaeTrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            learning_rate: 5e-3,
            batch_size: 128,
            max_epochs: 200,
            patience: 16,
            seed: 0,
        }
    }
}

impl Params for Sae {
    fn param_slices(&self) -> Vec<&[f64]> {
        vec![self.m.as_slice().unwrap(), self.b.as_slice().unwrap()]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.m.as_slice_mut().unwrap(), self.b.as_slice_mut().unwrap()]
    }
}

#[derive(Debug, Clone)]
pub struct SaeGrads {
    pub m: Array2<f64>,
    pub b: Array1<f64>,
}

impl SaeGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        vec![self.m.as_slice().unwrap(), self.b.as_slice().unwrap()]
    }
}

/// Per-neuron activation summary over a batch of representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronStats {
    pub fire_count: usize,
    pub mean_positive: f64,
    pub max: f64,
}

impl NeuronStats {
    pub fn is_dead(&self) -> bool {
        self.fire_count == 0
    }
}

#[derive(Debug, Clone)]
pub struct SaeTrainReport {
    pub sae: Sae,
    /// `(epoch, held-out reconstruction loss)`; epoch 0 is the init.
    pub history: Vec<(usize, f64)>,
    pub best_epoch: usize,
}

impl Sae {
    /// `M ~ U(±1/√d_in)`, `b = 0`.
    pub fn new(d_in: usize, ratio: usize, alpha: f64, rng: &mut impl Rng) -> Result<Self> {
        if d_in == 0 || ratio == 0 {
            return Err(Error::Config("SAE needs d_in ≥ 1 and R ≥ 1".into()));
        }
        let limit = 1.0 / (d_in as f64).sqrt();
        let d_hid = ratio * d_in;
        Ok(Self {
            m: Array2::from_shape_fn((d_hid, d_in), |_| rng.gen_range(-limit..limit)),
            b: Array1::zeros(d_hid),
            ratio,
            alpha,
        })
    }

    pub fn from_parts(m: Array2<f64>, b: Array1<f64>, ratio: usize, alpha: f64) -> Result<Self> {
        if ratio == 0 || m.nrows() != ratio * m.ncols() {
            return Err(Error::shape("SAE d_hid = R·d_in", ratio * m.ncols(), m.nrows()));
        }
        if b.len() != m.nrows() {
            return Err(Error::shape("SAE bias", m.nrows(), b.len()));
        }
        Ok(Self { m, b, ratio, alpha })
    }

    pub fn d_in(&self) -> usize {
        self.m.ncols()
    }

    pub fn d_hid(&self) -> usize {
        self.m.nrows()
    }

    pub fn encode(&self, h: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if h.ncols() != self.d_in() {
            return Err(Error::shape("SAE encode input", self.d_in(), h.ncols()));
        }
        let mut codes = affine(h, &self.m, &self.b);
        relu_inplace(&mut codes);
        Ok(codes)
    }

    /// `codes · M`, i.e. `Mᵀ` applied to each code row.
    pub fn decode(&self, codes: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if codes.ncols() != self.d_hid() {
            return Err(Error::shape("SAE decode input", self.d_hid(), codes.ncols()));
        }
        Ok(codes.dot(&self.m))
    }

    pub fn reconstruct(&self, h: &ArrayView2<f64>) -> Result<Array2<f64>> {
        self.decode(&self.encode(h)?.view())
    }

    /// Mean over rows of ‖h − ĥ‖².
    pub fn reconstruction_loss(&self, h: &ArrayView2<f64>) -> Result<f64> {
        if h.nrows() == 0 {
            return Err(Error::EmptyInput("SAE batch"));
        }
        let r = self.reconstruct(h)?;
        Ok((&r - h).mapv(|v| v * v).sum() / h.nrows() as f64)
    }

    /// Mean over rows of ‖h − ĥ‖² + α‖code‖₁.
    pub fn loss(&self, h: &ArrayView2<f64>) -> Result<f64> {
        if h.nrows() == 0 {
            return Err(Error::EmptyInput("SAE batch"));
        }
        let codes = self.encode(h)?;
        let r = self.decode(&codes.view())?;
        let n = h.nrows() as f64;
        Ok((&r - h).mapv(|v| v * v).sum() / n + self.alpha * codes.sum() / n)
    }

    /// Loss and gradient. `M` collects both the decoder term (through
    /// `Mᵀ`) and the encoder term.
    pub fn loss_and_grad(&self, h: &ArrayView2<f64>) -> Result<(f64, SaeGrads)> {
        if h.nrows() == 0 {
            return Err(Error::EmptyInput("SAE batch"));
        }
        let n = h.nrows() as f64;
        let z = affine(h, &self.m, &self.b);
        let codes = z.mapv(|v| v.max(0.0));
        let recon = codes.dot(&self.m);
        let resid = &recon - h;
        let loss = resid.mapv(|v| v * v).sum() / n + self.alpha * codes.sum() / n;

        let d_recon = resid * (2.0 / n);
        let mut grad_m = codes.t().dot(&d_recon);
        let mut d_codes = d_recon.dot(&self.m.t());
        d_codes += self.alpha / n;
        let d_z = d_codes * &z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        grad_m += &d_z.t().dot(h);
        let grad_b = d_z.sum_axis(Axis(0));
        Ok((
            loss,
            SaeGrads {
                m: grad_m,
                b: grad_b,
            },
        ))
    }

    pub fn activation_stats(&self, h: &ArrayView2<f64>) -> Result<Vec<NeuronStats>> {
        let codes = self.encode(h)?;
        Ok(activation_stats_of(&codes))
    }
}

pub fn activation_stats_of(codes: &Array2<f64>) -> Vec<NeuronStats> {
    codes
        .axis_iter(Axis(1))
        .map(|col| {
            let pos: Vec<f64> = col.iter().copied().filter(|&v| v > 0.0).collect();
            NeuronStats {
                fire_count: pos.len(),
                mean_positive: if pos.is_empty() {
                    0.0
                } else {
                    pos.iter().sum::<f64>() / pos.len() as f64
                },
                max: col.iter().cloned().fold(0.0, f64::max),
            }
        })
        .collect()
}

/// Step 2: fit the SAE to training representations, early-stopping on the
/// held-out reconstruction loss.
pub fn train_sae(
    h_train: &Array2<f64>,
    h_val: &Array2<f64>,
    ratio: usize,
    cfg: &SaeTrainConfig,
) -> Result<SaeTrainReport> {
    if h_train.nrows() == 0 || h_val.nrows() == 0 {
        return Err(Error::EmptyInput("SAE training or validation activations"));
    }
    if h_val.ncols() != h_train.ncols() {
        return Err(Error::shape("SAE validation width", h_train.ncols(), h_val.ncols()));
    }
    if cfg.batch_size == 0 || cfg.patience == 0 || !(cfg.learning_rate > 0.0) || !(cfg.alpha >= 0.0) {
        return Err(Error::Config("invalid SAE training configuration".into()));
    }
    let mut rng = seed::rng(seed::derive(cfg.seed, "sae-init", 0));
    let mut sae = Sae::new(h_train.ncols(), ratio, cfg.alpha, &mut rng)?;

    let init_val = sae.reconstruction_loss(&h_val.view())?;
    let mut history = vec![(0, init_val)];
    let mut best = (sae.clone(), 0usize, init_val);
    let mut stale = 0;
    let mut opt = Adam::for_params(cfg.learning_rate, &sae);
    let mut shuffle_rng = seed::rng(seed::derive(cfg.seed, "sae-shuffle", 0));
    let mut order: Vec<usize> = (0..h_train.nrows()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let hb = h_train.select(Axis(0), chunk);
            let (loss, grads) = sae.loss_and_grad(&hb.view())?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            opt.step(sae.param_slices_mut(), grads.slices());
        }
        let val = sae.reconstruction_loss(&h_val.view())?;
        if !val.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push((epoch, val));
        if val < best.2 {
            best = (sae.clone(), epoch, val);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(SaeTrainReport {
        sae: best.0,
        history,
        best_epoch: best.1,
    })
}

/// Max relative error of the tied-weight gradient vs central differences.
pub fn gradient_check(sae: &Sae, h: &ArrayView2<f64>) -> Result<f64> {
    let (_, g) = sae.loss_and_grad(h)?;
    let mut probe = sae.clone();
    Ok(crate::gradcheck::max_relative_error(
        &sae.flat_params(),
        &g.slices().concat(),
        |p| {
            probe.set_flat_params(p);
            probe.loss(h).expect("shapes fixed")
        },
    ))
}
