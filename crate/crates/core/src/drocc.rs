//! One-class trainer.
//!
//! Training alternates two phases per mini-batch once the warm-up is over:
//!
//! 1. *Ascent*: starting from `h ~ N(0, I)`, take `m` normalized gradient steps that
//!    increase `bce(f(x + h), -1)`, projecting `h` back onto the annulus
//!    `r <= ||h|| <= gamma r` after every step.
//! 2. *Descent*: one optimizer step on
//!    `lambda ||W||^2 + mean bce(f(x), +1) + mu * mean bce(f(x + h), -1)`.
//!
//! The warm-up runs `warmup_steps` optimizer steps on the first (labeled) term alone,
//! without weight decay.
//!
//! The same engine drives the limited-negatives trainers in [`crate::lf`]; there the labeled
//! term covers both classes, adversarial points are generated from positive rows only, and
//! the projection may use a Mahalanobis metric.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nd::{backward, bce_logit_loss, input_backward, l2_norm, Label, MlpModel, OptimizerKind, OptimizerState, ParamGrads, Tensor2};
use crate::projection::{project_displacement, project_displacement_mahalanobis, sample_uniform_displacement};
use crate::rng::{stream_rng, streams, RunRng};

/// How negatives are produced around each training point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeMode {
    /// Projected gradient ascent on the negative-label loss.
    #[default]
    Ascent,
    /// Uniform draws from the annulus, no ascent (ablation).
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroccConfig {
    /// Inner radius; `None` means `sqrt(d) / 2`.
    pub radius: Option<f64>,
    pub gamma: f64,
    pub lambda: f64,
    pub mu: f64,
    pub ascent_step: f64,
    pub ascent_iters: usize,
    /// Optimizer steps on the labeled loss alone before adversarial training starts.
    pub warmup_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub mode: NegativeMode,
    /// Run the adversarial phase on every n-th batch (1 = every batch).
    pub adversarial_every: usize,
}

impl Default for DroccConfig {
    fn default() -> Self {
        Self {
            radius: None,
            gamma: 2.0,
            lambda: 0.0,
            mu: 1.0,
            ascent_step: 0.01,
            ascent_iters: 10,
            warmup_steps: 100,
            epochs: 50,
            batch_size: 128,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            mode: NegativeMode::Ascent,
            adversarial_every: 1,
        }
    }
}

impl DroccConfig {
    pub fn radius_for(&self, dim: usize) -> f64 {
        self.radius.unwrap_or_else(|| (dim as f64).sqrt() / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("radius must be > 0, got {r}"));
            }
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be >= 1, got {}", self.gamma));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be >= 0, got {}", self.mu));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.ascent_step > 0.0 && self.ascent_step.is_finite()) {
            return bad(format!("ascent_step must be > 0, got {}", self.ascent_step));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.adversarial_every == 0 {
            return bad("adversarial_every must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean labeled cross-entropy (positives only for one-class training).
    pub positive: f64,
    /// Mean negative-label loss on generated points.
    pub adversarial: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub warmup_losses: Vec<f64>,
    pub epochs: Vec<EpochLoss>,
    pub model: MlpModel,
    pub wall_time: Duration,
    pub seed: u64,
    /// Number of generated points that entered a descent step.
    pub adversarial_points: usize,
    /// Influence weights in effect during the last epoch (Mahalanobis metric only).
    pub sigma: Option<Vec<f64>>,
}

impl TrainReport {
    /// Equality of everything except wall time.
    pub fn same_outcome(&self, other: &TrainReport) -> bool {
        self.warmup_losses == other.warmup_losses
            && self.epochs == other.epochs
            && self.model == other.model
            && self.seed == other.seed
            && self.adversarial_points == other.adversarial_points
            && self.sigma == other.sigma
    }
}

/// Geometry used to keep generated points inside the annulus.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SearchMetric<'a> {
    Euclidean,
    Mahalanobis { sigma: &'a [f64], grid_points: usize },
}

impl SearchMetric<'_> {
    fn project<R: Rng + ?Sized>(&self, h: &mut [f64], radius: f64, gamma: f64, rng: &mut R) {
        match *self {
            SearchMetric::Euclidean => {
                project_displacement(h, radius, gamma, rng);
            }
            SearchMetric::Mahalanobis { sigma, grid_points } => {
                project_displacement_mahalanobis(h, sigma, radius, gamma, grid_points, rng);
            }
        }
    }
}

/// Normality score: the raw logit.
pub fn score(model: &MlpModel, x: &Tensor2) -> Result<Vec<f64>> {
    model.forward(x)
}

/// Anomaly score: the negated logit.
pub fn anomaly_score(model: &MlpModel, x: &Tensor2) -> Result<Vec<f64>> {
    Ok(model.forward(x)?.into_iter().map(|s| -s).collect())
}

/// Projected gradient ascent for negatives around each row of `x` (Euclidean annulus).
///
/// Returns the displacements `h`; the generated points are `x + h`. The model is not
/// modified.
pub fn adversarial_search<R: Rng + ?Sized>(
    model: &MlpModel,
    x: &Tensor2,
    cfg: &DroccConfig,
    rng: &mut R,
) -> Result<Tensor2> {
    search(model, x, cfg, cfg.radius_for(x.cols()), SearchMetric::Euclidean, rng, None)
}

/// Mean negative-label loss per ascent iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AscentTrace {
    /// At the start of the iteration (after the previous projection).
    pub start: Vec<f64>,
    /// After the gradient step, before projection.
    pub stepped: Vec<f64>,
}

/// As [`adversarial_search`], also recording the loss around every ascent step.
pub fn adversarial_search_traced<R: Rng + ?Sized>(
    model: &MlpModel,
    x: &Tensor2,
    cfg: &DroccConfig,
    rng: &mut R,
) -> Result<(Tensor2, AscentTrace)> {
    let mut trace = AscentTrace::default();
    let h = search(
        model,
        x,
        cfg,
        cfg.radius_for(x.cols()),
        SearchMetric::Euclidean,
        rng,
        Some(&mut trace),
    )?;
    Ok((h, trace))
}

/// Uniform random displacements in the Euclidean annulus (the no-ascent ablation).
pub fn random_negatives<R: Rng + ?Sized>(x: &Tensor2, cfg: &DroccConfig, rng: &mut R) -> Tensor2 {
    let radius = cfg.radius_for(x.cols());
    let mut h = Tensor2::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        sample_uniform_displacement(h.row_mut(i), radius, cfg.gamma, rng);
    }
    h
}

/// Mean `bce(f(x + h), -1)`.
pub fn negative_label_loss(model: &MlpModel, x: &Tensor2, h: &Tensor2) -> Result<f64> {
    let logits = model.forward(&x.add(h)?)?;
    Ok(logits.iter().map(|&z| bce_logit_loss(z, Label::Negative)).sum::<f64>() / logits.len().max(1) as f64)
}

pub(crate) fn search<R: Rng + ?Sized>(
    model: &MlpModel,
    x: &Tensor2,
    cfg: &DroccConfig,
    radius: f64,
    metric: SearchMetric<'_>,
    rng: &mut R,
    mut trace: Option<&mut AscentTrace>,
) -> Result<Tensor2> {
    let (n, d) = (x.rows(), x.cols());
    if d != model.input_dim() {
        return Err(Error::ShapeMismatch {
            context: "adversarial search input",
            expected: model.input_dim(),
            found: d,
        });
    }
    let mut h = Tensor2::zeros(n, d);
    if cfg.mode == NegativeMode::Random {
        for i in 0..n {
            sample_uniform_displacement(h.row_mut(i), radius, cfg.gamma, rng);
            if let SearchMetric::Mahalanobis { .. } = metric {
                metric.project(h.row_mut(i), radius, cfg.gamma, rng);
            }
        }
        return Ok(h);
    }

    for v in h.as_mut_slice() {
        *v = rng.sample(StandardNormal);
    }
    if cfg.ascent_iters == 0 {
        for i in 0..n {
            metric.project(h.row_mut(i), radius, cfg.gamma, rng);
        }
        return Ok(h);
    }
    let neg = vec![Label::Negative; n];
    let ones = vec![1.0; n];
    for _ in 0..cfg.ascent_iters {
        if let Some(t) = trace.as_deref_mut() {
            t.start.push(negative_label_loss(model, x, &h)?);
        }
        let xh = x.add(&h)?;
        let grads = input_backward(model, &xh, &neg, &ones)?.0;
        for i in 0..n {
            let g = grads.row(i);
            let norm = l2_norm(g);
            // a vanishing gradient leaves this row's h in place
            if norm > 0.0 && norm.is_finite() {
                let step = cfg.ascent_step / norm;
                for (hv, gv) in h.row_mut(i).iter_mut().zip(g) {
                    *hv += step * gv;
                }
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.stepped.push(negative_label_loss(model, x, &h)?);
        }
        for i in 0..n {
            metric.project(h.row_mut(i), radius, cfg.gamma, rng);
        }
    }
    Ok(h)
}

/// How the engine obtains the Mahalanobis weights.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SigmaSource {
    /// Plain Euclidean annulus.
    None,
    /// Fixed weights for the whole run.
    Fixed(Vec<f64>),
    /// Recomputed from the current model at the start of every epoch.
    Adaptive { floor: f64, unit_mean: bool },
}

pub(crate) struct EngineSpec<'a> {
    pub cfg: &'a DroccConfig,
    /// Per-example weight on negative-labeled rows in the labeled term.
    pub negative_weight: f64,
    pub sigma: SigmaSource,
    pub grid_points: usize,
}

/// Positions of positive rows within a batch; only these seed adversarial points.
pub(crate) fn adversarial_sources(labels: &[Label]) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_positive())
        .map(|(i, _)| i)
        .collect()
}

fn check_step(loss: f64, grads: &ParamGrads, epoch: usize, batch: usize) -> Result<()> {
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::Divergence { epoch, batch, loss });
    }
    Ok(())
}

pub(crate) fn run_engine(
    mut model: MlpModel,
    features: &Tensor2,
    labels: &[Label],
    spec: EngineSpec<'_>,
) -> Result<TrainReport> {
    let cfg = spec.cfg;
    cfg.validate()?;
    let start = Instant::now();
    let n = features.rows();
    if n == 0 {
        return Err(Error::EmptyData("training data"));
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            context: "training labels",
            expected: n,
            found: labels.len(),
        });
    }
    if features.cols() != model.input_dim() {
        return Err(Error::ShapeMismatch {
            context: "training features",
            expected: model.input_dim(),
            found: features.cols(),
        });
    }
    if !labels.iter().any(|l| l.is_positive()) {
        return Err(Error::EmptyData("training data has no positive rows"));
    }
    let positives: Vec<usize> = adversarial_sources(labels);
    let radius = cfg.radius_for(features.cols());
    let mut optimizer = OptimizerState::new(cfg.optimizer, cfg.learning_rate, cfg.lambda)?;
    let mut shuffle_rng = stream_rng(cfg.seed, streams::SHUFFLE);
    let mut adv_rng: RunRng = stream_rng(cfg.seed, streams::ADVERSARIAL);
    let row_weight = |l: Label| if l.is_positive() { 1.0 } else { spec.negative_weight };

    let mut order: Vec<usize> = (0..n).collect();
    let bs = cfg.batch_size.min(n);

    // warm-up: labeled loss only, no weight decay
    let mut warmup_losses = Vec::with_capacity(cfg.warmup_steps);
    let mut cursor = n;
    for step in 0..cfg.warmup_steps {
        if cursor + bs > n {
            order.shuffle(&mut shuffle_rng);
            cursor = 0;
        }
        let idx = &order[cursor..cursor + bs];
        cursor += bs;
        let xb = features.select_rows(idx);
        let yb: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
        let wb: Vec<f64> = yb.iter().map(|&l| row_weight(l)).collect();
        let b = backward(&model, &xb, &yb, &wb)?;
        check_step(b.loss, &b.param_grads, 0, step)?;
        optimizer.step(&mut model, &b.param_grads, false);
        warmup_losses.push(b.loss);
    }

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut adversarial_points = 0;
    let mut sigma: Option<Vec<f64>> = match &spec.sigma {
        SigmaSource::Fixed(s) => Some(s.clone()),
        _ => None,
    };
    let pos_features = features.select_rows(&positives);
    let mut batch_counter = 0usize;

    for epoch in 0..cfg.epochs {
        if let SigmaSource::Adaptive { floor, unit_mean } = spec.sigma {
            let mut s = crate::lf::update_sigma_with_floor(&model, &pos_features, floor)?.sigma;
            if unit_mean {
                crate::lf::rescale_to_unit_mean(&mut s, floor);
            }
            sigma = Some(s);
        }
        let metric = match (&spec.sigma, &sigma) {
            (SigmaSource::None, _) | (_, None) => SearchMetric::Euclidean,
            (_, Some(s)) => SearchMetric::Mahalanobis {
                sigma: s,
                grid_points: spec.grid_points,
            },
        };

        order.shuffle(&mut shuffle_rng);
        let (mut sum_lab, mut sum_adv, mut sum_tot, mut nb) = (0.0, 0.0, 0.0, 0usize);
        for (bi, idx) in order.chunks(bs).enumerate() {
            let xb = features.select_rows(idx);
            let yb: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
            let wb: Vec<f64> = yb.iter().map(|&l| row_weight(l)).collect();
            let lab = backward(&model, &xb, &yb, &wb)?;
            let mut grads = lab.param_grads;
            let mut total = lab.loss;
            let mut adv_loss = 0.0;

            let sources = adversarial_sources(&yb);
            if batch_counter % cfg.adversarial_every == 0 && !sources.is_empty() {
                let xp = xb.select_rows(&sources);
                let h = search(&model, &xp, cfg, radius, metric, &mut adv_rng, None)?;
                let x_adv = xp.add(&h)?;
                let m = x_adv.rows();
                let adv = backward(&model, &x_adv, &vec![Label::Negative; m], &vec![1.0; m])?;
                grads.add_scaled(&adv.param_grads, cfg.mu);
                adv_loss = adv.loss;
                total += cfg.mu * adv.loss;
                adversarial_points += m;
            }
            batch_counter += 1;
            check_step(total, &grads, epoch, bi)?;
            optimizer.step(&mut model, &grads, true);
            if !model.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi,
                    loss: total,
                });
            }
            sum_lab += lab.loss;
            sum_adv += adv_loss;
            sum_tot += total;
            nb += 1;
        }
        let k = nb.max(1) as f64;
        epochs.push(EpochLoss {
            epoch,
            positive: sum_lab / k,
            adversarial: sum_adv / k,
            total: sum_tot / k,
        });
    }

    Ok(TrainReport {
        warmup_losses,
        epochs,
        model,
        wall_time: start.elapsed(),
        seed: cfg.seed,
        adversarial_points,
        sigma: match spec.sigma {
            SigmaSource::None => None,
            _ => sigma,
        },
    })
}

/// Warm-up only: `warmup_steps` optimizer steps on positive-label cross-entropy.
pub fn warmup(model: MlpModel, positives: &Tensor2, cfg: &DroccConfig) -> Result<MlpModel> {
    let cfg = DroccConfig {
        epochs: 0,
        ..cfg.clone()
    };
    Ok(train(model, positives, &cfg)?.model)
}

/// Full one-class training on rows assumed typical.
pub fn train(model: MlpModel, positives: &Tensor2, cfg: &DroccConfig) -> Result<TrainReport> {
    let labels = vec![Label::Positive; positives.rows()];
    run_engine(
        model,
        positives,
        &labels,
        EngineSpec {
            cfg,
            negative_weight: 1.0,
            sigma: SigmaSource::None,
            grid_points: crate::projection::DEFAULT_GRID_POINTS,
        },
    )
}
