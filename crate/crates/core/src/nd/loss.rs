use serde::{Deserialize, Serialize};

/// Binary label: `Positive` is the normal / typical class (+1), `Negative` the anomalous class (-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(logit)` against the label, i.e. `softplus(-y * logit)`.
#[inline]
pub fn bce_logit_loss(logit: f64, label: Label) -> f64 {
    softplus(-label.sign() * logit)
}

/// Derivative of [`bce_logit_loss`] with respect to the logit.
#[inline]
pub fn bce_logit_grad(logit: f64, label: Label) -> f64 {
    let y = label.sign();
    -y * sigmoid(-y * logit)
}
