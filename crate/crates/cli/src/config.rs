//! Experiment configuration: one TOML file with `[dataset]`, `[model]`, `[trainer]`,
//! `[eval]` and `[run]` sections of plain key/value pairs.

use std::path::{Path, PathBuf};

use drocc_core::drocc::{DroccConfig, NegativeMode};
use drocc_core::lf::{LfConfig, LfVariant, SigmaMode};
use drocc_core::nd::{Activation, OptimizerKind};
use drocc_core::projection::{DEFAULT_GRID_POINTS, SIGMA_FLOOR};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Positives on the 2-D sine wave; test negatives are the wave shifted by `negative_param`.
    Sine2d,
    /// 10-D noisy sine; negatives displaced in the second coordinate.
    NoisySine10d,
    /// Uniform ball; test negatives on the sphere of radius `negative_param`.
    Ball,
    /// Tabular data from `csv_path`.
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    #[default]
    None,
    /// Train mean removed, all features divided by the largest train std.
    Isotropic,
    /// Zero mean, unit variance per feature (train statistics).
    PerFeature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n_train: usize,
    pub n_test: usize,
    /// Ball dimension; ignored by the other generators.
    pub dim: usize,
    /// Displacement (sine) or sphere radius (ball) of the test negatives.
    pub negative_param: f64,
    /// Labeled negatives added to the training set (limited-negatives trainers).
    pub train_negatives: usize,
    pub train_negative_param: f64,
    pub standardize: Standardize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    pub label_column: String,
    /// Label value of the normal class.
    pub positive_value: String,
    /// Train/val/test ratios for CSV data.
    pub split: [f64; 3],
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Sine2d,
            n_train: 1000,
            n_test: 1000,
            dim: 3,
            negative_param: 1.0,
            train_negatives: 0,
            train_negative_param: 1.0,
            standardize: Standardize::Isotropic,
            csv_path: None,
            label_column: "label".into(),
            positive_value: "0".into(),
            split: [0.6, 0.2, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Drocc,
    Lf,
    Oe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerSpec {
    pub algorithm: Algorithm,
    /// Inner radius in the (standardized) feature space; omitted means `sqrt(d) / 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub gamma: f64,
    pub lambda: f64,
    pub mu: f64,
    pub ascent_step: f64,
    pub ascent_iters: usize,
    pub warmup_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub mode: NegativeMode,
    pub adversarial_every: usize,
    pub grid_points: usize,
    pub sigma_mode: SigmaMode,
    pub sigma_floor: f64,
    pub negative_weight: f64,
    pub normalize_sigma: bool,
}

impl Default for TrainerSpec {
    fn default() -> Self {
        let d = DroccConfig::default();
        Self {
            algorithm: Algorithm::Drocc,
            radius: d.radius,
            gamma: d.gamma,
            lambda: d.lambda,
            mu: d.mu,
            ascent_step: d.ascent_step,
            ascent_iters: d.ascent_iters,
            warmup_steps: d.warmup_steps,
            epochs: d.epochs,
            batch_size: d.batch_size,
            optimizer: d.optimizer,
            learning_rate: d.learning_rate,
            mode: d.mode,
            adversarial_every: d.adversarial_every,
            grid_points: DEFAULT_GRID_POINTS,
            sigma_mode: SigmaMode::Adaptive,
            sigma_floor: SIGMA_FLOOR,
            negative_weight: 1.0,
            normalize_sigma: false,
        }
    }
}

impl TrainerSpec {
    pub fn drocc_config(&self, seed: u64) -> DroccConfig {
        DroccConfig {
            radius: self.radius,
            gamma: self.gamma,
            lambda: self.lambda,
            mu: self.mu,
            ascent_step: self.ascent_step,
            ascent_iters: self.ascent_iters,
            warmup_steps: self.warmup_steps,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            optimizer: self.optimizer,
            learning_rate: self.learning_rate,
            mode: self.mode,
            adversarial_every: self.adversarial_every,
        }
    }

    pub fn lf_config(&self, seed: u64) -> LfConfig {
        LfConfig {
            base: self.drocc_config(seed),
            grid_points: self.grid_points,
            variant: if self.algorithm == Algorithm::Oe {
                LfVariant::Oe
            } else {
                LfVariant::Lf
            },
            sigma_mode: self.sigma_mode,
            sigma_floor: self.sigma_floor,
            negative_weight: self.negative_weight,
            normalize_sigma: self.normalize_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub fpr_targets: Vec<f64>,
    /// Fraction flagged for F1; omitted means the test set's negative fraction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contamination: Option<f64>,
    pub nearest_neighbor: bool,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            fpr_targets: vec![0.03, 0.05],
            contamination: None,
            nearest_neighbor: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            out_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    pub trainer: TrainerSpec,
    pub eval: EvalSpec,
    pub run: RunSpec,
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> CliResult<()> {
        let d = &self.dataset;
        if d.kind == DatasetKind::Csv && d.csv_path.is_none() {
            return Err(field_error("dataset.csv_path", "required when kind = \"csv\""));
        }
        if d.kind != DatasetKind::Csv {
            if d.n_train == 0 {
                return Err(field_error("dataset.n_train", "must be >= 1"));
            }
            if d.n_test == 0 {
                return Err(field_error("dataset.n_test", "must be >= 1"));
            }
            if !(d.negative_param > 0.0 && d.negative_param.is_finite()) {
                return Err(field_error("dataset.negative_param", "must be > 0"));
            }
        }
        if d.kind == DatasetKind::Ball && d.dim == 0 {
            return Err(field_error("dataset.dim", "must be >= 1"));
        }
        if self.model.hidden.iter().any(|&h| h == 0) {
            return Err(field_error("model.hidden", "layer widths must be >= 1"));
        }
        if self.run.seeds.is_empty() {
            return Err(field_error("run.seeds", "need at least one seed"));
        }
        if self.eval.fpr_targets.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(field_error("eval.fpr_targets", "each target must lie in (0, 1)"));
        }
        if let Some(c) = self.eval.contamination {
            if !(c > 0.0 && c < 1.0) {
                return Err(field_error("eval.contamination", "must lie in (0, 1)"));
            }
        }
        let t = &self.trainer;
        if t.algorithm != Algorithm::Drocc && d.kind != DatasetKind::Csv && d.train_negatives == 0 {
            return Err(field_error(
                "dataset.train_negatives",
                "lf/oe trainers need labeled negatives (set train_negatives >= 1)",
            ));
        }
        t.lf_config(0)
            .validate()
            .map_err(|e| field_error("trainer", e))?;
        Ok(())
    }

    /// Layer widths including input and output.
    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.model.hidden);
        dims.push(1);
        dims
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("[trainer]\nepochs = 3\n[run]\nseeds = [7]\n").unwrap();
        assert_eq!(cfg.trainer.epochs, 3);
        assert_eq!(cfg.run.seeds, vec![7]);
        assert_eq!(cfg.dataset, DatasetSpec::default());
    }

    #[test]
    fn unknown_and_invalid_fields_are_reported() {
        let e = ExperimentConfig::from_toml("[trainer]\nepochz = 3\n").unwrap_err();
        assert!(e.to_string().contains("epochz"), "{e}");
        let e = ExperimentConfig::from_toml("[trainer]\ngamma = 0.5\n").unwrap_err();
        assert!(e.to_string().contains("gamma"), "{e}");
        let e = ExperimentConfig::from_toml("[run]\nseeds = []\n").unwrap_err();
        assert!(e.to_string().contains("run.seeds"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }
}
