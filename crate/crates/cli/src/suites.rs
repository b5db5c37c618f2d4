//! Canned reproduction suites and ablation sweeps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use drocc_core::drocc::NegativeMode;
use drocc_core::nd::OptimizerKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, DatasetKind, ExperimentConfig, Standardize};
use crate::error::{CliError, CliResult};
use crate::harness::{build_data, evaluate, nn_auroc, synthetic_negatives, train_model, SeedResult, TEST_NEG_OFFSET};
use crate::record::{mean_std, RunRecord};
use crate::snapshot::write_atomic;

pub const SUITES: [&str; 6] = ["sine_table", "sphere_table", "rand_ablation", "ocln_synthetic", "radius_sweep", "mu_sweep"];

pub const SINE_DISPLACEMENTS: [f64; 6] = [0.2, 0.4, 0.6, 0.8, 1.0, 2.0];
pub const SPHERE_RADII: [f64; 5] = [1.2, 1.4, 1.6, 1.8, 2.0];
pub const RADIUS_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const MU_VALUES: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
/// Sphere radius of the test negatives used by the sweeps.
pub const SWEEP_NEGATIVE_RADIUS: f64 = 1.2;

/// What the rows of a suite vary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowAxis {
    /// Test negatives only: one model per seed serves every row.
    NegativeParam,
    Radius,
    Mu,
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub name: String,
    pub axis: RowAxis,
    pub rows: Vec<f64>,
    pub columns: Vec<Column>,
    /// Also report recall at the configured FPR targets.
    pub show_recall: bool,
}

/// One table cell: per-seed values in seed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub column: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl Cell {
    fn new(column: impl Into<String>, values: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&values);
        Self {
            column: column.into(),
            values,
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub value: f64,
    pub cells: Vec<Cell>,
}

impl Row {
    pub fn cell(&self, column: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.column == column)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteTable {
    pub suite: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<Row>,
}

pub struct SuiteOutput {
    pub table: SuiteTable,
    /// One record per (row, column), named `<column>_<row label>`.
    pub records: Vec<(String, RunRecord)>,
}

fn sine_base() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dataset.kind = DatasetKind::Sine2d;
    c.dataset.n_train = 1000;
    c.dataset.n_test = 1000;
    c.dataset.standardize = Standardize::Isotropic;
    c.trainer.radius = Some(0.055);
    c.trainer.ascent_step = 0.05;
    c.trainer.epochs = 1000;
    c.eval.nearest_neighbor = true;
    c
}

fn sphere_base() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dataset.kind = DatasetKind::Ball;
    c.dataset.dim = 3;
    c.dataset.n_train = 4096;
    c.dataset.n_test = 1000;
    c.dataset.standardize = Standardize::None;
    c.trainer.radius = Some(0.3);
    c.trainer.ascent_step = 0.05;
    c.trainer.epochs = 75;
    c.eval.nearest_neighbor = true;
    c
}

fn ocln_base() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dataset.kind = DatasetKind::NoisySine10d;
    c.dataset.n_train = 1024;
    c.dataset.n_test = 1024;
    c.dataset.negative_param = 0.5;
    c.dataset.train_negatives = 64;
    c.dataset.train_negative_param = 1.0;
    c.dataset.standardize = Standardize::Isotropic;
    c.trainer.radius = Some(10f64.sqrt() / 2.0);
    c.trainer.ascent_step = 0.05;
    c.trainer.learning_rate = 3e-3;
    c.trainer.epochs = 400;
    c
}

/// Tabular Thyroid run on a user-supplied CSV (`label` column, `0` = normal).
pub fn thyroid_config(csv_path: PathBuf) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dataset.kind = DatasetKind::Csv;
    c.dataset.csv_path = Some(csv_path);
    c.dataset.standardize = Standardize::PerFeature;
    c.model.hidden = vec![128];
    c.trainer.radius = Some(2.5);
    c.trainer.mu = 1.0;
    c.trainer.optimizer = OptimizerKind::Adam;
    c.trainer.learning_rate = 1e-3;
    c.trainer.ascent_step = 0.01;
    c.trainer.epochs = 100;
    c
}

fn column(name: &str, config: ExperimentConfig) -> Column {
    Column {
        name: name.into(),
        config,
    }
}

/// Tuned configuration of a named suite.
pub fn suite(name: &str) -> CliResult<Suite> {
    let s = match name {
        "sine_table" => Suite {
            name: name.into(),
            axis: RowAxis::NegativeParam,
            rows: SINE_DISPLACEMENTS.to_vec(),
            columns: vec![column("drocc", sine_base())],
            show_recall: false,
        },
        "sphere_table" => Suite {
            name: name.into(),
            axis: RowAxis::NegativeParam,
            rows: SPHERE_RADII.to_vec(),
            columns: vec![column("drocc", sphere_base())],
            show_recall: false,
        },
        "rand_ablation" => {
            let mut random = sphere_base();
            random.trainer.mode = NegativeMode::Random;
            random.eval.nearest_neighbor = false;
            Suite {
                name: name.into(),
                axis: RowAxis::NegativeParam,
                rows: SPHERE_RADII.to_vec(),
                columns: vec![
                    column("drocc", ExperimentConfig {
                        eval: random.eval.clone(),
                        ..sphere_base()
                    }),
                    column("drocc_random", random),
                ],
                show_recall: false,
            }
        }
        "ocln_synthetic" => {
            let mut drocc = ocln_base();
            drocc.trainer.algorithm = Algorithm::Drocc;
            let mut lf = ocln_base();
            lf.trainer.algorithm = Algorithm::Lf;
            lf.trainer.radius = Some(0.3);
            lf.trainer.normalize_sigma = true;
            let mut oe = lf.clone();
            oe.trainer.algorithm = Algorithm::Oe;
            Suite {
                name: name.into(),
                axis: RowAxis::NegativeParam,
                rows: vec![0.5],
                columns: vec![column("drocc", drocc), column("drocc_lf", lf), column("drocc_oe", oe)],
                show_recall: true,
            }
        }
        "radius_sweep" | "mu_sweep" => {
            let mut base = sphere_base();
            base.dataset.negative_param = SWEEP_NEGATIVE_RADIUS;
            base.eval.nearest_neighbor = false;
            let default_r = (base.dataset.dim as f64).sqrt() / 2.0;
            let (axis, rows) = if name == "radius_sweep" {
                (RowAxis::Radius, RADIUS_MULTIPLIERS.iter().map(|m| m * default_r).collect())
            } else {
                (RowAxis::Mu, MU_VALUES.to_vec())
            };
            Suite {
                name: name.into(),
                axis,
                rows,
                columns: vec![column("drocc", base)],
                show_recall: false,
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "--suite: unknown suite {other:?} (expected one of {})",
                SUITES.join(", ")
            )))
        }
    };
    Ok(s)
}

impl Suite {
    /// Replaces seeds in every column.
    pub fn with_seeds(mut self, seeds: &[u64]) -> Self {
        for c in &mut self.columns {
            c.config.run.seeds = seeds.to_vec();
        }
        self
    }

    /// Shrinks every column to a few epochs and small samples, for smoke tests.
    pub fn quick(mut self) -> Self {
        for c in &mut self.columns {
            let d = &mut c.config.dataset;
            d.n_train = d.n_train.min(128);
            d.n_test = d.n_test.min(64);
            d.train_negatives = d.train_negatives.min(8);
            let t = &mut c.config.trainer;
            t.epochs = 2;
            t.warmup_steps = 2;
            t.batch_size = 32;
        }
        self
    }

    pub fn seeds(&self) -> &[u64] {
        &self.columns[0].config.run.seeds
    }

    fn row_label(&self, v: f64) -> String {
        match self.axis {
            RowAxis::NegativeParam => match self.columns[0].config.dataset.kind {
                DatasetKind::Ball => format!("radius={v}"),
                _ => format!("displacement={v}"),
            },
            RowAxis::Radius => format!("r={v:.4}"),
            RowAxis::Mu => format!("mu={v}"),
        }
    }

    fn row_config(&self, base: &ExperimentConfig, v: f64) -> ExperimentConfig {
        let mut c = base.clone();
        match self.axis {
            RowAxis::NegativeParam => c.dataset.negative_param = v,
            RowAxis::Radius => c.trainer.radius = Some(v),
            RowAxis::Mu => c.trainer.mu = v,
        }
        c
    }

    /// Per-seed results for one column, indexed `[row][seed]`.
    fn run_column(&self, col: &Column) -> CliResult<Vec<Vec<SeedResult>>> {
        let seeds = col.config.run.seeds.clone();
        let per_seed: Vec<Vec<SeedResult>> = seeds
            .par_iter()
            .map(|&seed| self.run_column_seed(col, seed))
            .collect::<CliResult<_>>()?;
        Ok((0..self.rows.len())
            .map(|r| per_seed.iter().map(|s| s[r].clone()).collect())
            .collect())
    }

    fn run_column_seed(&self, col: &Column, seed: u64) -> CliResult<Vec<SeedResult>> {
        match self.axis {
            RowAxis::NegativeParam => {
                let start = Instant::now();
                let data = build_data(&col.config.dataset, seed)?;
                let (snap, report) = train_model(&col.config, &data, seed)?;
                let train_time = start.elapsed().as_secs_f64();
                let final_loss = report.epochs.last().map_or(f64::NAN, |e| e.total);
                let train_pos = data.train.positives();
                self.rows
                    .iter()
                    .map(|&v| {
                        let cfg = self.row_config(&col.config, v);
                        let neg = synthetic_negatives(&cfg.dataset, cfg.dataset.n_test, v, seed + TEST_NEG_OFFSET)?;
                        let report = evaluate(&cfg, &snap, &data.test_pos, &neg, None)?;
                        let nn = if cfg.eval.nearest_neighbor {
                            Some(nn_auroc(&train_pos, &data.test_pos, &neg)?)
                        } else {
                            None
                        };
                        Ok(SeedResult {
                            seed,
                            wall_time_secs: train_time,
                            final_loss,
                            report,
                            nn_auroc: nn,
                        })
                    })
                    .collect()
            }
            RowAxis::Radius | RowAxis::Mu => self
                .rows
                .iter()
                .map(|&v| Ok(crate::harness::run_seed(&self.row_config(&col.config, v), seed)?.1))
                .collect(),
        }
    }

    pub fn run(&self) -> CliResult<SuiteOutput> {
        let start = Instant::now();
        let mut rows: Vec<Row> = self
            .rows
            .iter()
            .map(|&v| Row {
                label: self.row_label(v),
                value: v,
                cells: Vec::new(),
            })
            .collect();
        let mut records = Vec::new();
        for col in &self.columns {
            let results = self.run_column(col)?;
            let elapsed = start.elapsed().as_secs_f64();
            for (r, seeds) in results.into_iter().enumerate() {
                let row = &mut rows[r];
                let pct = |f: &dyn Fn(&SeedResult) -> f64| seeds.iter().map(|s| 100.0 * f(s)).collect::<Vec<_>>();
                row.cells.push(Cell::new(col.name.clone(), pct(&|s| s.report.auroc)));
                if self.show_recall {
                    for (k, t) in col.config.eval.fpr_targets.iter().enumerate() {
                        let name = format!("{}_recall@{}%fpr", col.name, t * 100.0);
                        row.cells.push(Cell::new(name, pct(&|s| s.report.recall_at_fpr[k].recall)));
                    }
                }
                if col.config.eval.nearest_neighbor {
                    row.cells.push(Cell::new("nn", pct(&|s| s.nn_auroc.unwrap_or(f64::NAN))));
                }
                let cfg = self.row_config(&col.config, self.rows[r]);
                let name = format!("{}_{}", col.name, row.label);
                records.push((name, RunRecord::new(cfg, seeds, elapsed)));
            }
        }
        Ok(SuiteOutput {
            table: SuiteTable {
                suite: self.name.clone(),
                seeds: self.seeds().to_vec(),
                rows,
            },
            records,
        })
    }
}

impl SuiteTable {
    /// Fixed-width text table: one line per row, `mean ± std` per cell (AUROC in percent).
    pub fn render(&self) -> String {
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "# {} (seeds {})", self.suite, seeds.join(","));
        let Some(first) = self.rows.first() else {
            return out;
        };
        let _ = write!(out, "{:<20}", "row");
        for c in &first.cells {
            let _ = write!(out, " {:>24}", c.column);
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<20}", row.label);
            for c in &row.cells {
                let _ = write!(out, " {:>24}", format!("{:.2} ± {:.2}", c.mean, c.std));
            }
            out.push('\n');
        }
        out.push_str("# per-seed values\n");
        for row in &self.rows {
            for c in &row.cells {
                let vals: Vec<String> = c.values.iter().map(|v| format!("{v:.4}")).collect();
                let _ = writeln!(out, "{} {} [{}]", row.label, c.column, vals.join(", "));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("table is always serializable")
    }
}

/// Writes `table.txt`, `table.toml` and one record per (row, column) under `dir`.
pub fn write_output(out: &SuiteOutput, dir: &Path) -> CliResult<()> {
    write_atomic(&dir.join("table.txt"), out.table.render().as_bytes())?;
    write_atomic(&dir.join("table.toml"), out.table.to_text().as_bytes())?;
    for (name, rec) in &out.records {
        rec.save(&dir.join(format!("record_{}.toml", sanitize(name))))?;
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' { c } else { '_' })
        .collect()
}
