//! Trainers for the limited-negatives setting.
//!
//! Labeled cross-entropy covers every row (positives and the few known negatives); the
//! adversarial term is generated from positive rows only. [`LfVariant::Lf`] searches in a
//! diagonal Mahalanobis annulus whose weights `sigma_j` measure how strongly coordinate `j`
//! moves the logit. [`LfVariant::Oe`] keeps the Euclidean annulus.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::drocc::{run_engine, search, DroccConfig, EngineSpec, SearchMetric, SigmaSource, TrainReport};
use crate::error::{Error, Result};
use crate::nd::{MlpModel, Tensor2};
use crate::projection::{DEFAULT_GRID_POINTS, SIGMA_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaWeights {
    pub sigma: Vec<f64>,
    pub floor: f64,
    pub epoch_stamp: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LfVariant {
    #[default]
    Lf,
    Oe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Refreshed from the model at the start of each epoch.
    #[default]
    Adaptive,
    /// All ones for the whole run.
    FixedOnes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LfConfig {
    #[serde(flatten)]
    pub base: DroccConfig,
    pub grid_points: usize,
    pub variant: LfVariant,
    pub sigma_mode: SigmaMode,
    pub sigma_floor: f64,
    /// Per-row weight of negative-labeled rows in the cross-entropy term.
    pub negative_weight: f64,
    /// Rescale sigma to unit mean after each refresh.
    pub normalize_sigma: bool,
}

impl Default for LfConfig {
    fn default() -> Self {
        Self {
            base: DroccConfig::default(),
            grid_points: DEFAULT_GRID_POINTS,
            variant: LfVariant::Lf,
            sigma_mode: SigmaMode::Adaptive,
            sigma_floor: SIGMA_FLOOR,
            negative_weight: 1.0,
            normalize_sigma: false,
        }
    }
}

impl LfConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.grid_points < 2 {
            return Err(Error::InvalidConfig("grid_points must be >= 2".into()));
        }
        if !(self.sigma_floor >= SIGMA_FLOOR && self.sigma_floor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma_floor must be >= {SIGMA_FLOOR}, got {}",
                self.sigma_floor
            )));
        }
        if !(self.negative_weight >= 0.0 && self.negative_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "negative_weight must be >= 0, got {}",
                self.negative_weight
            )));
        }
        Ok(())
    }
}

/// `sigma_j` = mean over rows of `|d f(x) / d x_j|` (gradient of the logit), floored.
pub fn update_sigma(model: &MlpModel, positives: &Tensor2) -> Result<SigmaWeights> {
    update_sigma_with_floor(model, positives, SIGMA_FLOOR)
}

pub fn update_sigma_with_floor(model: &MlpModel, positives: &Tensor2, floor: f64) -> Result<SigmaWeights> {
    if positives.rows() == 0 {
        return Err(Error::EmptyData("update_sigma: no positive rows"));
    }
    let g = model.score_input_gradients(positives)?;
    let mut sigma = vec![0.0; g.cols()];
    for row in g.iter_rows() {
        for (s, v) in sigma.iter_mut().zip(row) {
            *s += v.abs();
        }
    }
    let n = g.rows() as f64;
    for s in &mut sigma {
        *s = (*s / n).max(floor);
    }
    Ok(SigmaWeights {
        sigma,
        floor,
        epoch_stamp: 0,
    })
}

pub(crate) fn rescale_to_unit_mean(sigma: &mut [f64], floor: f64) {
    let mean = sigma.iter().sum::<f64>() / sigma.len().max(1) as f64;
    if mean > 0.0 {
        for s in sigma.iter_mut() {
            *s = (*s / mean).max(floor);
        }
    }
}

/// Ascent in the Mahalanobis annulus defined by `sigma`. `x` should hold positive rows only.
pub fn lf_adversarial_search<R: Rng + ?Sized>(
    model: &MlpModel,
    x: &Tensor2,
    sigma: &SigmaWeights,
    cfg: &LfConfig,
    rng: &mut R,
) -> Result<Tensor2> {
    if sigma.sigma.len() != x.cols() {
        return Err(Error::ShapeMismatch {
            context: "sigma length",
            expected: x.cols(),
            found: sigma.sigma.len(),
        });
    }
    let metric = SearchMetric::Mahalanobis {
        sigma: &sigma.sigma,
        grid_points: cfg.grid_points,
    };
    search(model, x, &cfg.base, cfg.base.radius_for(x.cols()), metric, rng, None)
}

fn sigma_source(cfg: &LfConfig, dim: usize) -> SigmaSource {
    match (cfg.variant, cfg.sigma_mode) {
        (LfVariant::Oe, _) => SigmaSource::None,
        (LfVariant::Lf, SigmaMode::FixedOnes) => SigmaSource::Fixed(vec![1.0; dim]),
        (LfVariant::Lf, SigmaMode::Adaptive) => SigmaSource::Adaptive {
            floor: cfg.sigma_floor,
            unit_mean: cfg.normalize_sigma,
        },
    }
}

/// Trains on labeled data using the configured variant.
pub fn train_lf(model: MlpModel, data: &Dataset, cfg: &LfConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if !data.labels.iter().any(|l| l.is_positive()) {
        return Err(Error::EmptyData("train_lf: no positive rows"));
    }
    run_engine(
        model,
        &data.features,
        &data.labels,
        EngineSpec {
            cfg: &cfg.base,
            negative_weight: cfg.negative_weight,
            sigma: sigma_source(cfg, data.dim()),
            grid_points: cfg.grid_points,
        },
    )
}

/// Euclidean-annulus variant: one-class loss plus cross-entropy on the known negatives.
pub fn train_oe(model: MlpModel, data: &Dataset, cfg: &LfConfig) -> Result<TrainReport> {
    let cfg = LfConfig {
        variant: LfVariant::Oe,
        ..cfg.clone()
    };
    train_lf(model, data, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nd::{Activation, Dense, Label};
    use crate::rng::stream_rng;

    #[test]
    fn linear_sigma_is_abs_weights() {
        let m = MlpModel::from_layers(
            Activation::Relu,
            vec![Dense {
                weights: Tensor2::from_vec(1, 2, vec![2.0, -3.0]).unwrap(),
                bias: vec![0.5],
            }],
        )
        .unwrap();
        let x = Tensor2::from_rows(&[[1.0, 2.0], [-4.0, 0.0]]).unwrap();
        assert_eq!(update_sigma(&m, &x).unwrap().sigma, vec![2.0, 3.0]);
    }

    #[test]
    fn constant_model_sigma_is_floor() {
        let m = MlpModel::zeros(&[3, 4, 1], Activation::Relu).unwrap();
        let x = Tensor2::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(update_sigma(&m, &x).unwrap().sigma, vec![SIGMA_FLOOR; 3]);
        assert!(update_sigma(&m, &Tensor2::zeros(0, 3)).is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = LfConfig {
            base: DroccConfig {
                radius: Some(0.3),
                epochs: 7,
                ..Default::default()
            },
            normalize_sigma: true,
            variant: LfVariant::Oe,
            ..Default::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<LfConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn unit_mean_rescale() {
        let mut s = vec![1.0, 3.0];
        rescale_to_unit_mean(&mut s, 1e-6);
        assert_eq!(s, vec![0.5, 1.5]);
    }

    #[test]
    fn no_positives_is_an_error() {
        let m = MlpModel::new(&[2, 4, 1], Activation::Relu, &mut stream_rng(0, 1)).unwrap();
        let ds = Dataset::new(Tensor2::from_rows(&[[0.0, 1.0]]).unwrap(), vec![Label::Negative]).unwrap();
        assert!(matches!(train_lf(m, &ds, &LfConfig::default()), Err(Error::EmptyData(_))));
    }

    #[test]
    fn mahalanobis_outputs_are_feasible() {
        let mut rng = stream_rng(3, 1);
        let m = MlpModel::new(&[3, 8, 1], Activation::Relu, &mut rng).unwrap();
        let x = Tensor2::from_rows(&[[0.0, 0.0, 0.0], [1.0, -1.0, 0.5], [2.0, 0.3, -0.7]]).unwrap();
        let sigma = SigmaWeights {
            sigma: vec![0.2, 1.0, 5.0],
            floor: SIGMA_FLOOR,
            epoch_stamp: 0,
        };
        for iters in [0, 5] {
            let cfg = LfConfig {
                base: DroccConfig {
                    radius: Some(0.7),
                    ascent_iters: iters,
                    ascent_step: 0.1,
                    ..Default::default()
                },
                ..Default::default()
            };
            let h = lf_adversarial_search(&m, &x, &sigma, &cfg, &mut rng).unwrap();
            for r in h.iter_rows() {
                let n = crate::projection::mahalanobis_norm(r, &sigma.sigma);
                assert!(n >= 0.7 - 1e-6 && n <= 1.4 + 1e-6, "{n}");
            }
        }
    }
}
