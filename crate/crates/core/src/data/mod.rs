//! Datasets: synthetic manifolds, CSV ingestion, normalization and splits.

mod csv_io;
mod synthetic;

pub use csv_io::{load_csv, write_csv};
pub use synthetic::{
    gen_ball, gen_noisy_sine10d, gen_noisy_sine10d_displaced, gen_sine2d, gen_sine_displaced,
    gen_sphere_surface, GeneratorSpec, SineWave, NOISY_SINE_DIM, NOISY_SINE_N, SINE_N,
};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nd::{Label, Tensor2};
use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Per-feature normalization statistics fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor2,
    pub labels: Vec<Label>,
    pub split: Vec<Split>,
    pub norm_stats: Option<NormStats>,
    pub contamination: Option<f64>,
}

impl Dataset {
    /// New dataset with every row tagged `Train`.
    pub fn new(features: Tensor2, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::ShapeMismatch {
                context: "Dataset labels",
                expected: features.rows(),
                found: labels.len(),
            });
        }
        let n = labels.len();
        Ok(Self {
            features,
            labels,
            split: vec![Split::Train; n],
            norm_stats: None,
            contamination: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Fraction of rows labeled negative.
    pub fn negative_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|l| !l.is_positive()).count() as f64 / self.len() as f64
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }

    /// Rows of one split as a standalone dataset (all tagged with that split).
    pub fn subset(&self, split: Split) -> Dataset {
        let idx = self.indices(split);
        Dataset {
            features: self.features.select_rows(&idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            split: vec![split; idx.len()],
            norm_stats: self.norm_stats.clone(),
            contamination: self.contamination,
        }
    }

    /// Feature rows carrying `label`.
    pub fn rows_with_label(&self, label: Label) -> Tensor2 {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == label).collect();
        self.features.select_rows(&idx)
    }

    pub fn positives(&self) -> Tensor2 {
        self.rows_with_label(Label::Positive)
    }

    pub fn negatives(&self) -> Tensor2 {
        self.rows_with_label(Label::Negative)
    }

    /// Appends `other`'s rows (labels and split tags kept).
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim() != other.dim() && !self.is_empty() && !other.is_empty() {
            return Err(Error::ShapeMismatch {
                context: "Dataset::concat",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let cols = if self.is_empty() { other.dim() } else { self.dim() };
        let mut data = self.features.as_slice().to_vec();
        data.extend_from_slice(other.features.as_slice());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut split = self.split.clone();
        split.extend_from_slice(&other.split);
        Ok(Dataset {
            features: Tensor2::from_vec(labels.len(), cols, data)?,
            labels,
            split,
            norm_stats: self.norm_stats.clone(),
            contamination: self.contamination,
        })
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = vec![split; self.len()];
        self
    }
}

/// Fits mean/std on the train split and standardizes every row with them.
///
/// Constant features get `std = 1`.
pub fn normalize(ds: &Dataset) -> Result<Dataset> {
    let train = ds.indices(Split::Train);
    if train.is_empty() {
        return Err(Error::EmptyData("normalize: no train rows"));
    }
    let d = ds.dim();
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in &train {
        for (m, v) in mean.iter_mut().zip(ds.features.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for &i in &train {
        for ((s, v), m) in var.iter_mut().zip(ds.features.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std: Vec<f64> = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    let stats = NormStats { mean, std };
    let mut out = ds.clone();
    for r in 0..out.len() {
        stats.apply_row(out.features.row_mut(r));
    }
    out.norm_stats = Some(stats);
    Ok(out)
}

/// Centers on the train mean and divides every feature by one common scale, the largest
/// per-feature train std. Distances are scaled uniformly, so the shape of the data is kept.
pub fn normalize_isotropic(ds: &Dataset) -> Result<Dataset> {
    let per_feature = normalize(ds)?;
    let stats = per_feature.norm_stats.expect("normalize sets stats");
    let scale = stats.std.iter().cloned().fold(0.0, f64::max);
    let stats = NormStats {
        std: vec![scale; stats.std.len()],
        mean: stats.mean,
    };
    let mut out = ds.clone();
    for r in 0..out.len() {
        stats.apply_row(out.features.row_mut(r));
    }
    out.norm_stats = Some(stats);
    Ok(out)
}

/// Random partition into train/val/test with the given ratios (normalized to sum 1).
///
/// Train and val counts are rounded; test receives the remainder.
pub fn split(ds: &Dataset, ratios: [f64; 3], seed: u64) -> Result<Dataset> {
    if ratios.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::InvalidConfig("split ratios must be finite and >= 0".into()));
    }
    let total: f64 = ratios.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidConfig("split ratios sum to zero".into()));
    }
    let n = ds.len();
    let n_train = ((ratios[0] / total) * n as f64).round() as usize;
    let n_val = (((ratios[1] / total) * n as f64).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    if n_train == 0 {
        return Err(Error::EmptyData("split: train split would be empty"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, streams::SPLIT));
    let mut out = ds.clone();
    for (k, &i) in perm.iter().enumerate() {
        out.split[i] = if k < n_train {
            Split::Train
        } else if k < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(out)
}
