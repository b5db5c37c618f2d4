//! Persisted per-run report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::harness::SeedResult;
use crate::snapshot::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single seed.
    pub std: f64,
    pub n: usize,
}

impl MetricSummary {
    pub fn from_values(metric: impl Into<String>, values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self {
            metric: metric.into(),
            mean,
            std,
            n: values.len(),
        }
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub library_version: String,
    pub total_wall_time_secs: f64,
    pub config: ExperimentConfig,
    pub aggregate: Vec<MetricSummary>,
    pub seeds: Vec<SeedResult>,
}

/// Named per-seed metric series pulled from the seed results.
pub fn metric_series(seeds: &[SeedResult]) -> Vec<(String, Vec<f64>)> {
    let Some(first) = seeds.first() else {
        return Vec::new();
    };
    let mut out: Vec<(String, Vec<f64>)> = vec![
        ("auroc".into(), seeds.iter().map(|s| s.report.auroc).collect()),
        ("f1".into(), seeds.iter().map(|s| s.report.f1).collect()),
        ("precision".into(), seeds.iter().map(|s| s.report.precision).collect()),
        ("recall".into(), seeds.iter().map(|s| s.report.recall).collect()),
    ];
    for (k, r) in first.report.recall_at_fpr.iter().enumerate() {
        out.push((
            format!("recall_at_fpr_{}", r.fpr),
            seeds.iter().map(|s| s.report.recall_at_fpr[k].recall).collect(),
        ));
    }
    if seeds.iter().all(|s| s.nn_auroc.is_some()) {
        out.push(("nn_auroc".into(), seeds.iter().map(|s| s.nn_auroc.unwrap()).collect()));
    }
    out.push(("final_loss".into(), seeds.iter().map(|s| s.final_loss).collect()));
    out
}

impl RunRecord {
    pub fn new(config: ExperimentConfig, seeds: Vec<SeedResult>, total_wall_time_secs: f64) -> Self {
        let aggregate = metric_series(&seeds)
            .into_iter()
            .map(|(name, vals)| MetricSummary::from_values(name, &vals))
            .collect();
        Self {
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            total_wall_time_secs,
            config,
            aggregate,
            seeds,
        }
    }

    pub fn summary(&self, metric: &str) -> Option<&MetricSummary> {
        self.aggregate.iter().find(|m| m.metric == metric)
    }

    /// Equality ignoring wall-clock fields.
    pub fn same_outcome(&self, other: &RunRecord) -> bool {
        let strip = |r: &RunRecord| {
            let mut r = r.clone();
            r.total_wall_time_secs = 0.0;
            for s in &mut r.seeds {
                s.wall_time_secs = 0.0;
            }
            r
        };
        strip(self) == strip(other)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("run record is always serializable")
    }

    pub fn from_text(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("run record: {e}")))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}
