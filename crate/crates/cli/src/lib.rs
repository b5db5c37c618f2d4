//! Experiment harness around `drocc-core`.
//!
//! Every command writes its artifacts under one output directory with stable names:
//!
//! | command        | files                                                         |
//! |----------------|---------------------------------------------------------------|
//! | `train`        | `config.toml`, `model_seed<N>.bin`, `record.toml`             |
//! | `eval`         | `eval.toml`                                                   |
//! | `repro`        | `<suite>/table.txt`, `<suite>/table.toml`, `<suite>/record_*.toml` |
//! | `boundary-grid`| `grid.csv`                                                    |

pub mod config;
pub mod error;
pub mod grid;
pub mod harness;
pub mod record;
pub mod snapshot;
pub mod suites;

use std::path::{Path, PathBuf};
use std::time::Instant;

use drocc_core::eval::EvalReport;
use rayon::prelude::*;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use record::RunRecord;
pub use snapshot::{write_atomic, Snapshot};

pub fn model_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("model_seed{seed}.bin"))
}

/// Trains and evaluates every seed in `cfg.run.seeds`, writing snapshots and the record
/// under `out`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> CliResult<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let runs = cfg
        .run
        .seeds
        .par_iter()
        .map(|&seed| harness::run_seed(cfg, seed))
        .collect::<CliResult<Vec<_>>>()?;
    write_atomic(&out.join("config.toml"), cfg.to_toml().as_bytes())?;
    let mut seeds = Vec::with_capacity(runs.len());
    for (snap, result) in runs {
        snap.save(&model_path(out, result.seed))?;
        seeds.push(result);
    }
    let record = RunRecord::new(cfg.clone(), seeds, start.elapsed().as_secs_f64());
    record.save(&out.join("record.toml"))?;
    Ok(record)
}

/// Scores the test data of `cfg` (built with `seed`) with a saved model.
pub fn cmd_eval(model: &Path, cfg: &ExperimentConfig, seed: u64, out: &Path) -> CliResult<EvalReport> {
    cfg.validate()?;
    let snap = Snapshot::load(model)?;
    let data = harness::build_data(&cfg.dataset, seed)?;
    if data.test_pos.cols() != snap.model.input_dim() {
        return Err(CliError::Config(format!(
            "dataset: feature dim {} does not match model input dim {}",
            data.test_pos.cols(),
            snap.model.input_dim()
        )));
    }
    let report = harness::evaluate(cfg, &snap, &data.test_pos, &data.test_neg, data.val_neg.as_ref())?;
    write_atomic(&out.join("eval.toml"), report.to_text().as_bytes())?;
    Ok(report)
}

/// Runs a named suite; `seeds` overrides the suite's default seeds.
pub fn cmd_repro(name: &str, seeds: Option<&[u64]>, out: &Path) -> CliResult<suites::SuiteOutput> {
    let mut s = suites::suite(name)?;
    if let Some(seeds) = seeds {
        s = s.with_seeds(seeds);
    }
    let result = s.run()?;
    suites::write_output(&result, &out.join(name))?;
    Ok(result)
}

pub fn cmd_boundary_grid(model: &Path, bounds: grid::Bounds, resolution: usize, out: &Path) -> CliResult<PathBuf> {
    let snap = Snapshot::load(model)?;
    let g = grid::boundary_grid(&snap, bounds, resolution)?;
    let path = out.join("grid.csv");
    write_atomic(&path, grid::to_csv(&g).as_bytes())?;
    Ok(path)
}

/// Default configuration text, or the first column of a suite.
pub fn cmd_defaults(suite: Option<&str>) -> CliResult<String> {
    match suite {
        None => Ok(ExperimentConfig::default().to_toml()),
        Some(name) => {
            let s = suites::suite(name)?;
            let mut text = String::new();
            for c in &s.columns {
                text.push_str(&format!("# column: {}\n", c.name));
                text.push_str(&c.config.to_toml());
                text.push('\n');
            }
            Ok(text)
        }
    }
}
