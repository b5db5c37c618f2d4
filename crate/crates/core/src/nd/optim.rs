use serde::{Deserialize, Serialize};

use super::mlp::{MlpModel, ParamGrads};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// SGD or Adam with decoupled weight decay.
///
/// The regularizer `lambda * ||W||^2` contributes `2 * lambda * W` and is applied to weight
/// matrices only; biases are never decayed. For Adam the decay term bypasses the moment
/// estimates (AdamW style).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    weight_decay: f64,
    step: u64,
    first: Option<ParamGrads>,
    second: Option<ParamGrads>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be > 0, got {learning_rate}"
            )));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight decay must be >= 0, got {weight_decay}"
            )));
        }
        Ok(Self {
            kind,
            learning_rate,
            weight_decay,
            step: 0,
            first: None,
            second: None,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn weight_decay(&self) -> f64 {
        self.weight_decay
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update in place. `with_decay = false` skips the weight-decay term.
    pub fn step(&mut self, model: &mut MlpModel, grads: &ParamGrads, with_decay: bool) {
        self.step += 1;
        let lr = self.learning_rate;
        let decay = if with_decay { 2.0 * self.weight_decay } else { 0.0 };
        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, (gw, gb)) in model
                    .layers_mut()
                    .iter_mut()
                    .zip(grads.weights.iter().zip(&grads.biases))
                {
                    for (w, g) in layer.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                        *w -= lr * (g + decay * *w);
                    }
                    for (b, g) in layer.bias.iter_mut().zip(gb) {
                        *b -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let first = self.first.get_or_insert_with(|| ParamGrads::zeros_like(model));
                let second = self.second.get_or_insert_with(|| ParamGrads::zeros_like(model));
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                let adam = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64, decay: f64| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * (m_hat / (v_hat.sqrt() + ADAM_EPS) + decay * *p);
                };
                for (li, layer) in model.layers_mut().iter_mut().enumerate() {
                    let gw = grads.weights[li].as_slice();
                    let mw = first.weights[li].as_mut_slice();
                    let vw = second.weights[li].as_mut_slice();
                    for (i, w) in layer.weights.as_mut_slice().iter_mut().enumerate() {
                        adam(w, gw[i], &mut mw[i], &mut vw[i], decay);
                    }
                    let gb = &grads.biases[li];
                    let mb = &mut first.biases[li];
                    let vb = &mut second.biases[li];
                    for (i, b) in layer.bias.iter_mut().enumerate() {
                        adam(b, gb[i], &mut mb[i], &mut vb[i], 0.0);
                    }
                }
            }
        }
    }
}
