//! Dataset assembly and single-seed train/evaluate runs.

use std::time::Instant;

use drocc_core::data::{
    gen_ball, gen_noisy_sine10d, gen_noisy_sine10d_displaced, gen_sine2d, gen_sine_displaced,
    gen_sphere_surface, load_csv, normalize, normalize_isotropic, split, Dataset, NormStats, Split,
};
use drocc_core::eval::{auroc, nn_scores, EvalReport, ScoredSet};
use drocc_core::nd::{Label, MlpModel, Tensor2};
use drocc_core::rng::{stream_rng, streams};
use drocc_core::{drocc, lf};
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, DatasetKind, DatasetSpec, ExperimentConfig, Standardize};
use crate::error::CliResult;
use crate::snapshot::Snapshot;

/// Seed offsets so train, test positives, test negatives and training negatives never share
/// a stream.
pub const TEST_POS_OFFSET: u64 = 1000;
pub const TEST_NEG_OFFSET: u64 = 2000;
pub const TRAIN_NEG_OFFSET: u64 = 500;

/// Raw (untransformed) data for one seed.
#[derive(Debug, Clone)]
pub struct SeedData {
    /// Positives, plus labeled negatives when configured.
    pub train: Dataset,
    pub test_pos: Tensor2,
    pub test_neg: Tensor2,
    /// Validation negatives for threshold calibration (CSV data only).
    pub val_neg: Option<Tensor2>,
}

fn positives(kind: DatasetKind, spec: &DatasetSpec, n: usize, seed: u64) -> CliResult<Dataset> {
    Ok(match kind {
        DatasetKind::Sine2d => gen_sine2d(n, seed)?,
        DatasetKind::NoisySine10d => gen_noisy_sine10d(n, seed)?,
        DatasetKind::Ball => gen_ball(n, spec.dim, seed)?,
        DatasetKind::Csv => unreachable!("csv handled separately"),
    })
}

/// Negatives of a synthetic family at displacement or sphere radius `param`.
pub fn synthetic_negatives(spec: &DatasetSpec, n: usize, param: f64, seed: u64) -> CliResult<Tensor2> {
    Ok(match spec.kind {
        DatasetKind::Sine2d => gen_sine_displaced(n, param, seed)?.features,
        DatasetKind::NoisySine10d => gen_noisy_sine10d_displaced(n, param, seed)?.features,
        DatasetKind::Ball => gen_sphere_surface(n, spec.dim, param, seed)?.features,
        DatasetKind::Csv => unreachable!("csv handled separately"),
    })
}

pub fn build_data(spec: &DatasetSpec, seed: u64) -> CliResult<SeedData> {
    if spec.kind == DatasetKind::Csv {
        let path = spec.csv_path.as_ref().expect("validated");
        let all = load_csv(path, &spec.label_column, &spec.positive_value)?;
        let all = split(&all, spec.split, seed)?;
        let train = all.subset(Split::Train);
        let train_pos = Dataset::new(train.positives(), vec![Label::Positive; train.positives().rows()])?;
        let test = all.subset(Split::Test);
        let val = all.subset(Split::Val);
        return Ok(SeedData {
            train: train_pos,
            test_pos: test.positives(),
            test_neg: test.negatives(),
            val_neg: Some(val.negatives()).filter(|v| v.rows() > 0),
        });
    }
    let mut train = positives(spec.kind, spec, spec.n_train, seed)?;
    if spec.train_negatives > 0 {
        let neg = synthetic_negatives(spec, spec.train_negatives, spec.train_negative_param, seed + TRAIN_NEG_OFFSET)?;
        let neg = Dataset::new(neg, vec![Label::Negative; spec.train_negatives])?;
        train = train.concat(&neg)?;
    }
    Ok(SeedData {
        train,
        test_pos: positives(spec.kind, spec, spec.n_test, seed + TEST_POS_OFFSET)?.features,
        test_neg: synthetic_negatives(spec, spec.n_test, spec.negative_param, seed + TEST_NEG_OFFSET)?,
        val_neg: None,
    })
}

/// Fits the configured transform on the training rows. Only positives are used for the fit so
/// that adding labeled negatives does not move the coordinate system.
pub fn fit_standardization(mode: Standardize, train: &Dataset) -> CliResult<Option<NormStats>> {
    if mode == Standardize::None {
        return Ok(None);
    }
    let pos = train.positives();
    let n = pos.rows();
    let ds = Dataset::new(pos, vec![Label::Positive; n])?;
    let fitted = match mode {
        Standardize::Isotropic => normalize_isotropic(&ds)?,
        Standardize::PerFeature => normalize(&ds)?,
        Standardize::None => unreachable!(),
    };
    Ok(fitted.norm_stats)
}

pub fn apply(stats: Option<&NormStats>, x: &Tensor2) -> Tensor2 {
    let mut out = x.clone();
    if let Some(s) = stats {
        for r in 0..out.rows() {
            s.apply_row(out.row_mut(r));
        }
    }
    out
}

/// Trains one model according to `cfg` on already-built seed data.
pub fn train_model(cfg: &ExperimentConfig, data: &SeedData, seed: u64) -> CliResult<(Snapshot, drocc::TrainReport)> {
    let norm = fit_standardization(cfg.dataset.standardize, &data.train)?;
    let mut train = data.train.clone();
    train.features = apply(norm.as_ref(), &train.features);
    let dims = cfg.layer_dims(train.dim());
    let model = MlpModel::new(&dims, cfg.model.activation, &mut stream_rng(seed, streams::INIT))?;
    let report = match cfg.trainer.algorithm {
        Algorithm::Drocc => drocc::train(model, &train.positives(), &cfg.trainer.drocc_config(seed))?,
        Algorithm::Lf => lf::train_lf(model, &train, &cfg.trainer.lf_config(seed))?,
        Algorithm::Oe => lf::train_oe(model, &train, &cfg.trainer.lf_config(seed))?,
    };
    Ok((
        Snapshot {
            model: report.model.clone(),
            norm,
        },
        report,
    ))
}

pub fn evaluate(cfg: &ExperimentConfig, snap: &Snapshot, test_pos: &Tensor2, test_neg: &Tensor2, val_neg: Option<&Tensor2>) -> CliResult<EvalReport> {
    let sp = snap.score(test_pos)?;
    let sn = snap.score(test_neg)?;
    let sv = match val_neg {
        Some(v) => Some(snap.score(v)?),
        None => None,
    };
    let set = ScoredSet::from_parts(&sp, &sn)?;
    Ok(EvalReport::compute(
        &set,
        cfg.eval.contamination,
        &cfg.eval.fpr_targets,
        sv.as_deref(),
    )?)
}

/// Nearest-neighbor AUROC against the training positives.
pub fn nn_auroc(train_pos: &Tensor2, test_pos: &Tensor2, test_neg: &Tensor2) -> CliResult<f64> {
    let sp = nn_scores(train_pos, test_pos)?;
    let sn = nn_scores(train_pos, test_neg)?;
    Ok(auroc(&ScoredSet::from_parts(&sp, &sn)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub wall_time_secs: f64,
    pub final_loss: f64,
    pub report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nn_auroc: Option<f64>,
}

/// Full train and evaluate cycle for one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> CliResult<(Snapshot, SeedResult)> {
    let start = Instant::now();
    let data = build_data(&cfg.dataset, seed)?;
    let (snap, train_report) = train_model(cfg, &data, seed)?;
    let report = evaluate(cfg, &snap, &data.test_pos, &data.test_neg, data.val_neg.as_ref())?;
    let nn = if cfg.eval.nearest_neighbor {
        Some(nn_auroc(&data.train.positives(), &data.test_pos, &data.test_neg)?)
    } else {
        None
    };
    let final_loss = train_report
        .epochs
        .last()
        .map(|e| e.total)
        .or_else(|| train_report.warmup_losses.last().copied())
        .unwrap_or(f64::NAN);
    Ok((
        snap,
        SeedResult {
            seed,
            wall_time_secs: start.elapsed().as_secs_f64(),
            final_loss,
            report,
            nn_auroc: nn,
        },
    ))
}
