//! Deep robust one-class classification.
//!
//! A small fully-connected scorer is trained to give high logits on typical data and low
//! logits on adversarially generated points that sit in an annulus around each training
//! example. The labeled-negatives variant reweights input coordinates by the scorer's
//! sensitivity and projects onto a Mahalanobis annulus instead.
//!
//! Modules:
//! - [`nd`]: tensors, MLP with exact input/parameter gradients, loss, optimizers
//! - [`projection`]: Euclidean and diagonal-Mahalanobis annulus projections
//! - [`drocc`]: the one-class trainer
//! - [`lf`]: trainers for one-class classification with limited negatives
//! - [`data`]: synthetic manifolds, CSV ingestion, normalization and splits
//! - [`eval`]: AUROC, F1 at contamination, recall at fixed FPR, nearest-neighbor baseline

pub mod data;
pub mod drocc;
pub mod error;
pub mod eval;
pub mod lf;
pub mod nd;
pub mod projection;
pub mod rng;

pub use error::{Error, Result};
pub use nd::{Activation, Label, MlpModel, Tensor2};
