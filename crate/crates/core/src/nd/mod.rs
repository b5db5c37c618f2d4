//! Minimal dense numeric kernel: tensors, the MLP scorer, logistic loss and optimizers.

pub mod loss;
pub mod mlp;
pub mod optim;
pub mod tensor;

pub use loss::{bce_logit_grad, bce_logit_loss, sigmoid, softplus, Label};
pub use mlp::{backward, input_backward, Activation, Dense, GradientBundle, MlpModel, ParamGrads};
pub use optim::{OptimizerKind, OptimizerState};
pub use tensor::{dot, l2_norm, Tensor2};
