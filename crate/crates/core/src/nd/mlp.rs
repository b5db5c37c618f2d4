//! Dense feed-forward scorer `f: R^d -> R` with exact backpropagation.
//!
//! Layer weights are stored `(out_dim, in_dim)` row-major. Hidden layers apply the
//! configured activation, the output layer is the identity, so `forward` returns raw
//! logits (higher = more normal).
//!
//! Backprop returns gradients with respect to the parameters *and* to each input row.
//! The input gradients drive the adversarial search and the coordinate influence weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{bce_logit_grad, bce_logit_loss, Label};
use super::tensor::Tensor2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation and the activation output.
    #[inline]
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - post * post,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Tensor2,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    dims: Vec<usize>,
    activation: Activation,
    layers: Vec<Dense>,
}

/// Gradients shaped like the parameters of an [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Tensor2>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub param_grads: ParamGrads,
    /// One row per input example: d(loss)/d(x_i).
    pub input_grads: Tensor2,
    pub loss: f64,
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidConfig(
            "an MLP needs at least an input and an output dimension".into(),
        ));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidConfig("layer dimensions must be positive".into()));
    }
    if *dims.last().unwrap() != 1 {
        return Err(Error::InvalidConfig(format!(
            "scorer output dimension must be 1, got {}",
            dims.last().unwrap()
        )));
    }
    Ok(())
}

impl MlpModel {
    /// Random initialization: Kaiming-uniform weights (bound `sqrt(6 / fan_in)`) and biases
    /// uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        validate_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let wb = (6.0 / fan_in as f64).sqrt();
                let bb = 1.0 / (fan_in as f64).sqrt();
                let weights: Vec<f64> = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-wb..wb))
                    .collect();
                let bias = (0..fan_out).map(|_| rng.random_range(-bb..bb)).collect();
                Dense {
                    weights: Tensor2::from_vec(fan_out, fan_in, weights).expect("sized above"),
                    bias,
                }
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            layers,
        })
    }

    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        validate_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| Dense {
                weights: Tensor2::zeros(w[1], w[0]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            layers,
        })
    }

    pub fn from_layers(activation: Activation, layers: Vec<Dense>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidConfig("model has no layers".into()))?;
        let mut dims = vec![first.in_dim()];
        for layer in &layers {
            let prev = *dims.last().unwrap();
            if layer.in_dim() != prev {
                return Err(Error::ShapeMismatch {
                    context: "MlpModel::from_layers",
                    expected: prev,
                    found: layer.in_dim(),
                });
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::ShapeMismatch {
                    context: "MlpModel::from_layers bias",
                    expected: layer.out_dim(),
                    found: layer.bias.len(),
                });
            }
            if !layer.weights.is_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite("MlpModel::from_layers"));
            }
            dims.push(layer.out_dim());
        }
        validate_dims(&dims)?;
        Ok(Self {
            dims,
            activation,
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Squared l2 norm of the weight matrices (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice())
            .map(|w| w * w)
            .sum()
    }

    fn check_batch(&self, batch: &Tensor2) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "MlpModel input",
                expected: self.input_dim(),
                found: batch.cols(),
            });
        }
        Ok(())
    }

    /// Logit for a single example. `x.len()` must equal the input dimension.
    pub fn forward_row(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = layer.bias.clone();
            for (o, out) in next.iter_mut().enumerate() {
                let w = layer.weights.row(o);
                *out += w.iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>();
                if li != last {
                    *out = self.activation.apply(*out);
                }
            }
            cur = next;
        }
        cur[0]
    }

    /// Logits for every row of `batch`.
    pub fn forward(&self, batch: &Tensor2) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        Ok(batch.iter_rows().map(|x| self.forward_row(x)).collect())
    }

    /// Backpropagates per-example output seeds `d(objective)/d(f(x_i))`.
    ///
    /// Returns parameter gradients summed over the batch and the per-row input gradients.
    pub fn backward_seeded(&self, batch: &Tensor2, seeds: &[f64]) -> Result<(ParamGrads, Tensor2)> {
        self.check_batch(batch)?;
        if seeds.len() != batch.rows() {
            return Err(Error::ShapeMismatch {
                context: "backward seeds",
                expected: batch.rows(),
                found: seeds.len(),
            });
        }
        let mut grads = ParamGrads::zeros_like(self);
        let mut input_grads = Tensor2::zeros(batch.rows(), batch.cols());
        self.pass(batch, |row, _| seeds[row], Some(&mut grads), &mut input_grads);
        Ok((grads, input_grads))
    }

    /// Single forward/backward sweep. `seed(row, logit)` gives `d(objective)/d(f(x_row))`;
    /// parameter gradients are accumulated only when `grads` is given.
    pub(crate) fn pass(
        &self,
        batch: &Tensor2,
        mut seed: impl FnMut(usize, f64) -> f64,
        mut grads: Option<&mut ParamGrads>,
        input_grads: &mut Tensor2,
    ) {
        let n_layers = self.layers.len();
        let mut pre: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect();
        let mut post: Vec<Vec<f64>> = pre.clone();
        let widest = self.dims.iter().copied().max().unwrap_or(1);
        let mut delta = Vec::with_capacity(widest);
        let mut d_in = Vec::with_capacity(widest);

        for row in 0..batch.rows() {
            let x = batch.row(row);
            for li in 0..n_layers {
                let layer = &self.layers[li];
                let (done, rest) = post.split_at_mut(li);
                let input: &[f64] = if li == 0 { x } else { &done[li - 1] };
                let z = &mut pre[li];
                let a = &mut rest[0];
                for (o, zo) in z.iter_mut().enumerate() {
                    *zo = layer.bias[o]
                        + layer
                            .weights
                            .row(o)
                            .iter()
                            .zip(input)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                }
                if li + 1 == n_layers {
                    a.copy_from_slice(z);
                } else {
                    for (av, &zv) in a.iter_mut().zip(z.iter()) {
                        *av = self.activation.apply(zv);
                    }
                }
            }

            delta.clear();
            delta.push(seed(row, post[n_layers - 1][0]));
            for li in (0..n_layers).rev() {
                let layer = &self.layers[li];
                let input: &[f64] = if li == 0 { x } else { &post[li - 1] };
                let in_dim = layer.in_dim();
                if let Some(g) = grads.as_deref_mut() {
                    let gw = g.weights[li].as_mut_slice();
                    for (o, &d) in delta.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        g.biases[li][o] += d;
                        for (gv, &a) in gw[o * in_dim..(o + 1) * in_dim].iter_mut().zip(input) {
                            *gv += d * a;
                        }
                    }
                }
                d_in.clear();
                d_in.resize(in_dim, 0.0);
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (di, &w) in d_in.iter_mut().zip(layer.weights.row(o)) {
                        *di += d * w;
                    }
                }
                if li == 0 {
                    input_grads.row_mut(row).copy_from_slice(&d_in);
                } else {
                    let act = self.activation;
                    delta.clear();
                    delta.extend(
                        d_in.iter()
                            .zip(pre[li - 1].iter().zip(&post[li - 1]))
                            .map(|(&g, (&p, &q))| g * act.derivative(p, q)),
                    );
                }
            }
        }
    }

    /// Gradient of the raw logit `f(x)` with respect to each input row (unit output seed).
    pub fn score_input_gradients(&self, batch: &Tensor2) -> Result<Tensor2> {
        let seeds = vec![1.0; batch.rows()];
        Ok(self.backward_seeded(batch, &seeds)?.1)
    }
}

impl ParamGrads {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model
                .layers
                .iter()
                .map(|l| Tensor2::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: model.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ParamGrads, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += scale * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.as_mut_slice().iter_mut().for_each(|x| *x *= s);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
            && self.biases.iter().flatten().all(|b| b.is_finite())
    }
}

/// Weighted mean binary cross-entropy over the batch and its exact gradients.
///
/// The loss is `(1/n) * sum_i w_i * softplus(-y_i * f(x_i))`; the divisor is the batch size,
/// not the weight sum, so all-zero weights give a zero loss.
pub fn backward(
    model: &MlpModel,
    batch: &Tensor2,
    labels: &[Label],
    weights: &[f64],
) -> Result<GradientBundle> {
    let n = batch.rows();
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            context: "backward labels",
            expected: n,
            found: labels.len(),
        });
    }
    if weights.len() != n {
        return Err(Error::ShapeMismatch {
            context: "backward weights",
            expected: n,
            found: weights.len(),
        });
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidConfig("per-example weights must be finite and >= 0".into()));
    }
    model.check_batch(batch)?;
    let inv_n = if n == 0 { 0.0 } else { 1.0 / n as f64 };
    let mut loss = 0.0;
    let mut param_grads = ParamGrads::zeros_like(model);
    let mut input_grads = Tensor2::zeros(n, batch.cols());
    model.pass(
        batch,
        |row, z| {
            let w = weights[row];
            if w == 0.0 {
                return 0.0;
            }
            loss += w * bce_logit_loss(z, labels[row]);
            w * bce_logit_grad(z, labels[row]) * inv_n
        },
        Some(&mut param_grads),
        &mut input_grads,
    );
    Ok(GradientBundle {
        param_grads,
        input_grads,
        loss: loss * inv_n,
    })
}

/// As [`backward`] but skips parameter gradients; returns `(input_grads, loss)`.
pub fn input_backward(
    model: &MlpModel,
    batch: &Tensor2,
    labels: &[Label],
    weights: &[f64],
) -> Result<(Tensor2, f64)> {
    let n = batch.rows();
    if labels.len() != n || weights.len() != n {
        return Err(Error::ShapeMismatch {
            context: "input_backward labels/weights",
            expected: n,
            found: labels.len().min(weights.len()),
        });
    }
    model.check_batch(batch)?;
    let inv_n = if n == 0 { 0.0 } else { 1.0 / n as f64 };
    let mut loss = 0.0;
    let mut input_grads = Tensor2::zeros(n, batch.cols());
    model.pass(
        batch,
        |row, z| {
            loss += weights[row] * bce_logit_loss(z, labels[row]);
            weights[row] * bce_logit_grad(z, labels[row]) * inv_n
        },
        None,
        &mut input_grads,
    );
    Ok((input_grads, loss * inv_n))
}
