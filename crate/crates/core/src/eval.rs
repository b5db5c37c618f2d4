//! Evaluation metrics and the nearest-neighbor baseline.
//!
//! Scores are *normality* scores: higher means more typical. Labels follow
//! [`Label`]: `Positive` is normal, `Negative` anomalous.
//!
//! Tie conventions are part of the contract:
//! - AUROC uses midranks, so a tied (positive, negative) pair counts 1/2.
//! - `recall_at_fpr` counts a point as accepted only if its score is strictly above the
//!   threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nd::{Label, Tensor2};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::ShapeMismatch {
                context: "ScoredSet",
                expected: labels.len(),
                found: scores.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("ScoredSet scores"));
        }
        Ok(Self { scores, labels })
    }

    /// Builds a set from separate positive and negative score lists.
    pub fn from_parts(pos: &[f64], neg: &[f64]) -> Result<Self> {
        let mut scores = pos.to_vec();
        scores.extend_from_slice(neg);
        let mut labels = vec![Label::Positive; pos.len()];
        labels.extend(std::iter::repeat_n(Label::Negative, neg.len()));
        Self::new(scores, labels)
    }

    pub fn split_scores(&self) -> (Vec<f64>, Vec<f64>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (&s, &l) in self.scores.iter().zip(&self.labels) {
            if l.is_positive() {
                pos.push(s);
            } else {
                neg.push(s);
            }
        }
        (pos, neg)
    }
}

/// `P(score_pos > score_neg) + P(tie) / 2`, via the Mann-Whitney midrank sum.
pub fn auroc(set: &ScoredSet) -> Result<f64> {
    let n = set.scores.len();
    let n_pos = set.labels.iter().filter(|l| l.is_positive()).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUROC needs both classes (positives: {n_pos}, negatives: {n_neg})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| set.scores[a].total_cmp(&set.scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && set.scores[order[j + 1]] == set.scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if set.labels[k].is_positive() {
                pos_rank_sum += midrank;
            }
        }
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    let u = pos_rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * nn))
}

/// F1 statistics when the anomaly class is treated as the F1 "positive" class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Result {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Largest score among the flagged rows.
    pub threshold: f64,
    pub flagged: usize,
}

/// Flags the `round(ratio * n)` lowest-scoring rows as anomalies and scores that decision.
///
/// Rounding is half away from zero; ties in score are broken by row order so exactly that
/// many rows are flagged.
pub fn f1_at_contamination(set: &ScoredSet, ratio: f64) -> Result<F1Result> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "contamination ratio must be in (0, 1), got {ratio}"
        )));
    }
    let n = set.scores.len();
    let k = (ratio * n as f64).round() as usize;
    if k == 0 || k >= n {
        return Err(Error::UndefinedMetric(format!(
            "contamination {ratio} on {n} rows flags {k} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| set.scores[a].total_cmp(&set.scores[b]).then(a.cmp(&b)));
    let flagged = &order[..k];
    let tp = flagged
        .iter()
        .filter(|&&i| !set.labels[i].is_positive())
        .count() as f64;
    let actual = set.labels.iter().filter(|l| !l.is_positive()).count() as f64;
    let precision = tp / k as f64;
    let recall = if actual > 0.0 { tp / actual } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(F1Result {
        f1,
        precision,
        recall,
        threshold: set.scores[flagged[k - 1]],
        flagged: k,
    })
}

/// Decision threshold on negative scores that caps the false-positive rate at `fpr`.
///
/// Returns the order statistic `s_(k)` with `k = n - 1 - floor(fpr * n)` of the sorted
/// negatives; at most `floor(fpr * n)` negatives score strictly above it.
pub fn fpr_threshold(neg_scores: &[f64], fpr: f64) -> Result<f64> {
    if !(fpr > 0.0 && fpr < 1.0) {
        return Err(Error::InvalidConfig(format!("fpr must be in (0, 1), got {fpr}")));
    }
    if neg_scores.is_empty() {
        return Err(Error::EmptyData("recall_at_fpr: no negative scores"));
    }
    let mut sorted = neg_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let allowed = ((fpr * n as f64).floor() as usize).min(n - 1);
    Ok(sorted[n - 1 - allowed])
}

/// Fraction of `pos_scores` strictly above `threshold`.
pub fn recall_above(pos_scores: &[f64], threshold: f64) -> Result<f64> {
    if pos_scores.is_empty() {
        return Err(Error::EmptyData("recall: no positive scores"));
    }
    Ok(pos_scores.iter().filter(|&&s| s > threshold).count() as f64 / pos_scores.len() as f64)
}

/// Recall on positives when the threshold keeps the realized FPR on `neg_scores` <= `fpr`.
///
/// Returns `(recall, threshold)`.
pub fn recall_at_fpr(pos_scores: &[f64], neg_scores: &[f64], fpr: f64) -> Result<(f64, f64)> {
    let thr = fpr_threshold(neg_scores, fpr)?;
    Ok((recall_above(pos_scores, thr)?, thr))
}

/// Normality score of `x`: minus the Euclidean distance to the nearest training row.
pub fn nn_score(train: &Tensor2, x: &[f64]) -> Result<f64> {
    if train.rows() == 0 {
        return Err(Error::EmptyData("nn_score: empty training set"));
    }
    if x.len() != train.cols() {
        return Err(Error::ShapeMismatch {
            context: "nn_score",
            expected: train.cols(),
            found: x.len(),
        });
    }
    let best = train
        .iter_rows()
        .map(|r| r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(-best.sqrt())
}

pub fn nn_scores(train: &Tensor2, xs: &Tensor2) -> Result<Vec<f64>> {
    xs.iter_rows().map(|x| nn_score(train, x)).collect()
}

/// Where a recall-at-FPR threshold was calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSource {
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallAtFpr {
    pub fpr: f64,
    pub recall: f64,
    pub threshold: f64,
    pub threshold_source: ThresholdSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auroc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub contamination: f64,
    pub f1_threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub recall_at_fpr: Vec<RecallAtFpr>,
}

impl EvalReport {
    /// Computes every metric on `set`.
    ///
    /// `contamination` defaults to the set's true anomaly fraction. Recall-at-FPR thresholds
    /// are fitted on `validation_negatives` when supplied, otherwise on the test negatives.
    pub fn compute(
        set: &ScoredSet,
        contamination: Option<f64>,
        fpr_targets: &[f64],
        validation_negatives: Option<&[f64]>,
    ) -> Result<Self> {
        let auroc = auroc(set)?;
        let (pos, neg) = set.split_scores();
        let contamination = contamination.unwrap_or(neg.len() as f64 / set.scores.len() as f64);
        let f1 = f1_at_contamination(set, contamination)?;
        let recall_at_fpr = fpr_targets
            .iter()
            .map(|&fpr| {
                let (negs, source) = match validation_negatives {
                    Some(v) if !v.is_empty() => (v, ThresholdSource::Validation),
                    _ => (neg.as_slice(), ThresholdSource::Test),
                };
                let threshold = fpr_threshold(negs, fpr)?;
                Ok(RecallAtFpr {
                    fpr,
                    recall: recall_above(&pos, threshold)?,
                    threshold,
                    threshold_source: source,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            auroc,
            f1: f1.f1,
            precision: f1.precision,
            recall: f1.recall,
            contamination,
            f1_threshold: f1.threshold,
            n_pos: pos.len(),
            n_neg: neg.len(),
            recall_at_fpr,
        })
    }

    /// Key-value text rendering with a fixed field order.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("EvalReport is always serializable")
    }

    pub fn from_text(s: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(s)
    }
}
