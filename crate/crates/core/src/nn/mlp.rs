use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{affine, log_sum_exp, relu_inplace, serde_array1, serde_array2, softmax_rows};
use crate::optim::Params;

/// A fully connected layer; `w` is (out × in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    #[serde(with = "serde_array2")]
    pub w: Array2<f64>,
    #[serde(with = "serde_array1")]
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((outputs, inputs)),
            b: Array1::zeros(outputs),
        }
    }

    fn uniform(inputs: usize, outputs: usize, limit: f64, rng: &mut ChaCha8Rng) -> Self {
        let w = Array2::from_shape_fn((outputs, inputs), |_| rng.gen_range(-limit..limit));
        Self {
            w,
            b: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }
}

/// `hidden` are the ReLU layers of the representation network g, `head` is
/// the decision layer (W, c). The last hidden width is the penultimate
/// representation size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub hidden: Vec<Dense>,
    pub head: Dense,
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub h_l: Array2<f64>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub hidden: Vec<Dense>,
    pub head: Dense,
}

impl MlpGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in self.hidden.iter().chain(std::iter::once(&self.head)) {
            out.push(l.w.as_slice().unwrap());
            out.push(l.b.as_slice().unwrap());
        }
        out
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

impl Params for Mlp {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in self.hidden.iter().chain(std::iter::once(&self.head)) {
            out.push(l.w.as_slice().unwrap());
            out.push(l.b.as_slice().unwrap());
        }
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in self.hidden.iter_mut().chain(std::iter::once(&mut self.head)) {
            out.push(l.w.as_slice_mut().unwrap());
            out.push(l.b.as_slice_mut().unwrap());
        }
        out
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Mlp {
    /// He-uniform hidden layers, Glorot-uniform decision layer, zero biases.
    pub fn new(input_dim: usize, hidden: &[usize], n_classes: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if input_dim == 0 || n_classes == 0 || hidden.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut layers = Vec::with_capacity(hidden.len());
        let mut fan_in = input_dim;
        for &width in hidden {
            let limit = (6.0 / fan_in as f64).sqrt();
            layers.push(Dense::uniform(fan_in, width, limit, rng));
            fan_in = width;
        }
        let limit = (6.0 / (fan_in + n_classes) as f64).sqrt();
        let head = Dense::uniform(fan_in, n_classes, limit, rng);
        Ok(Self {
            hidden: layers,
            head,
        })
    }

    pub fn zeros(input_dim: usize, hidden: &[usize], n_classes: usize) -> Self {
        let mut layers = Vec::new();
        let mut fan_in = input_dim;
        for &w in hidden {
            layers.push(Dense::zeros(fan_in, w));
            fan_in = w;
        }
        Self {
            hidden: layers,
            head: Dense::zeros(fan_in, n_classes),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.first().unwrap_or(&self.head).inputs()
    }

    /// Width of the penultimate representation.
    pub fn d_in(&self) -> usize {
        self.head.inputs()
    }

    pub fn n_classes(&self) -> usize {
        self.head.outputs()
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.hidden.iter().map(Dense::outputs));
        dims.push(self.n_classes());
        dims
    }

    pub fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape("mlp input", self.input_dim(), x.ncols()));
        }
        Ok(())
    }

    /// The representation network g(x) in inference mode.
    pub fn represent(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut a = x.to_owned();
        for layer in &self.hidden {
            a = affine(&a.view(), &layer.w, &layer.b);
            relu_inplace(&mut a);
        }
        Ok(a)
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> Result<Forward> {
        let h_l = self.represent(x)?;
        let logits = affine(&h_l.view(), &self.head.w, &self.head.b);
        let probs = softmax_rows(&logits);
        Ok(Forward { h_l, logits, probs })
    }

    pub fn predict(&self, x: &ArrayView2<f64>) -> Result<Vec<usize>> {
        let f = self.forward(x)?;
        Ok(f.logits.outer_iter().map(crate::matrix::argmax).collect())
    }

    /// Σ|w| over every weight matrix (biases excluded).
    pub fn l1_norm(&self) -> f64 {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.head))
            .map(|l| l.w.iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }

    pub fn mean_abs_weight(&self) -> f64 {
        let n: usize = self
            .hidden
            .iter()
            .chain(std::iter::once(&self.head))
            .map(|l| l.w.len())
            .sum();
        self.l1_norm() / n as f64
    }

    /// Mean cross-entropy plus `l1 · Σ|w|`, inference mode.
    pub fn loss(&self, x: &ArrayView2<f64>, y: &[usize], l1: f64) -> Result<f64> {
        let f = self.forward(x)?;
        Ok(cross_entropy(&f.logits, y)? + l1 * self.l1_norm())
    }

    /// Loss and full parameter gradient, inference mode (no dropout).
    pub fn loss_and_grad(&self, x: &ArrayView2<f64>, y: &[usize], l1: f64) -> Result<(f64, MlpGrads)> {
        self.loss_and_grad_dropout(x, y, l1, 0.0, None)
    }

    /// Loss and gradients with inverted dropout after every hidden ReLU.
    pub(crate) fn loss_and_grad_dropout(
        &self,
        x: &ArrayView2<f64>,
        y: &[usize],
        l1: f64,
        dropout: f64,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, MlpGrads)> {
        self.check_input(x)?;
        if y.len() != x.nrows() {
            return Err(Error::shape("mlp labels", x.nrows(), y.len()));
        }
        let batch = x.nrows();
        if batch == 0 {
            return Err(Error::EmptyInput("training batch"));
        }

        // Forward, keeping each layer's input activation and its
        // combined ReLU/dropout multiplier.
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(self.hidden.len() + 1);
        let mut gates: Vec<Array2<f64>> = Vec::with_capacity(self.hidden.len());
        let mut a = x.to_owned();
        let keep = 1.0 - dropout;
        let mut rng = rng;
        for layer in &self.hidden {
            let z = affine(&a.view(), &layer.w, &layer.b);
            let mut gate = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            if dropout > 0.0 {
                let r = rng.as_deref_mut().expect("dropout needs an rng");
                gate.mapv_inplace(|g| {
                    if r.gen::<f64>() < keep {
                        g / keep
                    } else {
                        0.0
                    }
                });
            }
            inputs.push(a);
            a = &z * &gate;
            gates.push(gate);
        }
        inputs.push(a);
        let h = inputs.last().unwrap();
        let logits = affine(&h.view(), &self.head.w, &self.head.b);
        let loss = cross_entropy(&logits, y)? + l1 * self.l1_norm();

        let mut dlogits = softmax_rows(&logits);
        for (i, &c) in y.iter().enumerate() {
            dlogits[[i, c]] -= 1.0;
        }
        dlogits /= batch as f64;

        let head_grad = Dense {
            w: dlogits.t().dot(h) + &self.head.w.mapv(|w| l1 * sign(w)),
            b: dlogits.sum_axis(Axis(0)),
        };
        let mut da = dlogits.dot(&self.head.w);
        let mut hidden_grads = Vec::with_capacity(self.hidden.len());
        for (k, layer) in self.hidden.iter().enumerate().rev() {
            let dz = &da * &gates[k];
            let input = &inputs[k];
            hidden_grads.push(Dense {
                w: dz.t().dot(input) + &layer.w.mapv(|w| l1 * sign(w)),
                b: dz.sum_axis(Axis(0)),
            });
            if k > 0 {
                da = dz.dot(&layer.w);
            }
        }
        hidden_grads.reverse();
        Ok((
            loss,
            MlpGrads {
                hidden: hidden_grads,
                head: head_grad,
            },
        ))
    }
}

/// Mean softmax cross-entropy of integer labels.
pub(crate) fn cross_entropy(logits: &Array2<f64>, y: &[usize]) -> Result<f64> {
    if y.len() != logits.nrows() {
        return Err(Error::shape("cross-entropy labels", logits.nrows(), y.len()));
    }
    if y.is_empty() {
        return Err(Error::EmptyInput("cross-entropy batch"));
    }
    let mut total = 0.0;
    for (row, &c) in logits.outer_iter().zip(y) {
        if c >= row.len() {
            return Err(Error::LabelOutOfRange {
                label: c,
                classes: row.len(),
            });
        }
        total += log_sum_exp(row) - row[c];
    }
    Ok(total / y.len() as f64)
}

/// Max relative error between backprop and central finite differences of
/// the full loss (cross-entropy + L1), over every parameter.
pub fn gradient_check(model: &Mlp, x: &ArrayView2<f64>, y: &[usize], l1: f64) -> Result<f64> {
    let (_, grads) = model.loss_and_grad(x, y, l1)?;
    let params = model.flat_params();
    let mut probe = model.clone();
    Ok(crate::gradcheck::max_relative_error(&params, &grads.flat(), |p| {
        probe.set_flat_params(p);
        probe.loss(x, y, l1).expect("shapes fixed")
    }))
}
