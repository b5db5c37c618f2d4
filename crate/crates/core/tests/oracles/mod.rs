//! Independent reference computations shared by the core integration tests and the
//! acceptance suite. Nothing here calls the code path it checks.

#![allow(dead_code)]

use drocc_core::eval::{auroc, f1_at_contamination, recall_at_fpr, ScoredSet};
use drocc_core::nd::{backward, input_backward, Activation, Dense, Label, MlpModel, Tensor2};
use drocc_core::projection::{
    mahalanobis_norm, project_displacement, project_euclidean, project_mahalanobis, ActiveConstraint,
    EuclideanAnnulus, MahalanobisAnnulus, DEFAULT_GRID_POINTS,
};
use drocc_core::rng::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

// ---------------------------------------------------------------------------------------
// gradients

/// Plain forward pass recording every hidden pre-activation.
fn reference_forward(layers: &[Dense], act: Activation, x: &[f64], pre: &mut Vec<f64>) -> f64 {
    let mut a = x.to_vec();
    for (k, l) in layers.iter().enumerate() {
        let last = k + 1 == layers.len();
        let mut z = vec![0.0; l.out_dim()];
        for (o, zo) in z.iter_mut().enumerate() {
            *zo = l.bias[o] + (0..l.in_dim()).map(|i| l.weights.get(o, i) * a[i]).sum::<f64>();
        }
        if last {
            return z[0];
        }
        pre.extend_from_slice(&z);
        a = z
            .into_iter()
            .map(|v| match act {
                Activation::Relu => v.max(0.0),
                Activation::Tanh => v.tanh(),
            })
            .collect();
    }
    unreachable!("model has an output layer")
}

/// `ln(1 + exp(-y z))`, computed without the library's loss helpers.
fn reference_bce(z: f64, label: Label) -> f64 {
    let m = -label.sign() * z;
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

fn reference_loss(layers: &[Dense], act: Activation, x: &Tensor2, labels: &[Label], w: &[f64]) -> f64 {
    let mut scratch = Vec::new();
    let n = x.rows() as f64;
    x.iter_rows()
        .zip(labels)
        .zip(w)
        .map(|((row, &l), &wi)| wi * reference_bce(reference_forward(layers, act, row, &mut scratch), l))
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone)]
pub struct GradReport {
    pub instances: usize,
    pub values_checked: usize,
    /// Largest `|analytic - fd| / max(|analytic|, |fd|, 1e-6)`.
    pub worst_rel: f64,
    /// Largest forward mismatch against the reference forward pass.
    pub worst_forward: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central finite differences on parameters and inputs of random models and batches.
pub fn gradient_check(instances: usize, seed: u64) -> GradReport {
    const H: f64 = 1e-5;
    let mut report = GradReport {
        instances: 0,
        values_checked: 0,
        worst_rel: 0.0,
        worst_forward: 0.0,
    };
    let mut k = 0u64;
    while report.instances < instances {
        k += 1;
        let mut rng = stream_rng(seed, 1000 + k);
        let act = if k % 2 == 0 { Activation::Relu } else { Activation::Tanh };
        let d = rng.random_range(1..=6);
        let mut dims = vec![d];
        for _ in 0..rng.random_range(1..=3) {
            dims.push(rng.random_range(1..=8));
        }
        dims.push(1);
        let model = MlpModel::new(&dims, act, &mut rng).unwrap();
        let n = rng.random_range(1..=5);
        let x = Tensor2::from_vec(n, d, (0..n * d).map(|_| 1.5 * normal(&mut rng)).collect()).unwrap();
        let labels: Vec<Label> = (0..n)
            .map(|_| if rng.random_bool(0.5) { Label::Positive } else { Label::Negative })
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();

        // Finite differences across a ReLU kink are meaningless; resample such instances.
        let mut pre = Vec::new();
        let logits: Vec<f64> = x
            .iter_rows()
            .map(|r| reference_forward(model.layers(), act, r, &mut pre))
            .collect();
        if act == Activation::Relu && pre.iter().any(|p| p.abs() < 1e-3) {
            continue;
        }
        for (a, b) in logits.iter().zip(model.forward(&x).unwrap()) {
            report.worst_forward = report.worst_forward.max((a - b).abs());
        }

        let bundle = backward(&model, &x, &labels, &w).unwrap();
        let (ig, loss_only) = input_backward(&model, &x, &labels, &w).unwrap();
        assert_eq!(ig, bundle.input_grads, "input-only backward disagrees");
        assert!((loss_only - bundle.loss).abs() <= 1e-12 * bundle.loss.abs().max(1.0));

        let layers = model.layers().to_vec();
        let loss_at = |ls: &[Dense], xx: &Tensor2| reference_loss(ls, act, xx, &labels, &w);
        for (li, layer) in layers.iter().enumerate() {
            for p in 0..layer.weights.as_slice().len() + layer.bias.len() {
                let mut plus = layers.clone();
                let mut minus = layers.clone();
                let nw = layer.weights.as_slice().len();
                let (analytic, bump): (f64, &dyn Fn(&mut Dense, f64)) = if p < nw {
                    (bundle.param_grads.weights[li].as_slice()[p], &|l: &mut Dense, h| l.weights.as_mut_slice()[p] += h)
                } else {
                    (bundle.param_grads.biases[li][p - nw], &|l: &mut Dense, h| l.bias[p - nw] += h)
                };
                bump(&mut plus[li], H);
                bump(&mut minus[li], -H);
                let fd = (loss_at(&plus, &x) - loss_at(&minus, &x)) / (2.0 * H);
                report.worst_rel = report.worst_rel.max(rel(analytic, fd));
                report.values_checked += 1;
            }
        }
        for i in 0..n {
            for j in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp.set(i, j, x.get(i, j) + H);
                xm.set(i, j, x.get(i, j) - H);
                let fd = (loss_at(&layers, &xp) - loss_at(&layers, &xm)) / (2.0 * H);
                report.worst_rel = report.worst_rel.max(rel(bundle.input_grads.get(i, j), fd));
                report.values_checked += 1;
            }
        }
        report.instances += 1;
    }
    report
}

// ---------------------------------------------------------------------------------------
// Mahalanobis projection

#[derive(Debug, Clone, Default)]
pub struct MahalanobisReport {
    pub instances: usize,
    pub band_cases: usize,
    pub boundary_cases: usize,
    pub fallback_cases: usize,
    /// Largest `|ours - oracle| / oracle` over boundary cases.
    pub worst_objective_rel: f64,
    /// Cases where the returned point beat the oracle by more than the tolerance.
    pub oracle_beaten: usize,
    pub worst_feasibility: f64,
    pub worst_kkt: f64,
}

/// Best objective over a dense grid of the multiplier path `u(t) = delta / (1 + t sigma)`,
/// keeping only grid points that land in the annulus.
///
/// Inner side: `t in (-1/max sigma, 0]`, grid in `s = 1 + t max sigma`, half log-spaced down
/// to 1e-14 and half uniform. Outer side: `t = 1/nu` with `nu in (0, nu_max]`, the same
/// mixed spacing in `nu`.
pub fn dense_grid_oracle(delta: &[f64], sigma: &[f64], r: f64, gamma: f64, points: usize) -> f64 {
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let norm = mahalanobis_norm(delta, sigma);
    let half = points / 2;
    let unit: Vec<f64> = (0..half)
        .map(|i| 10f64.powf(-14.0 + 14.0 * i as f64 / (half - 1) as f64))
        .chain((0..points - half).map(|i| i as f64 / (points - half - 1) as f64))
        .collect();
    let mut u = vec![0.0; delta.len()];
    let mut best = f64::INFINITY;
    let lo = r * (1.0 - 1e-12);
    let hi = gamma * r * (1.0 + 1e-12);
    for &s in &unit {
        let factor = |sj: f64| -> f64 {
            if norm < r {
                let t = (s - 1.0) / smax;
                1.0 / (1.0 + t * sj)
            } else {
                let alpha = gamma * r / norm;
                let nu = s * alpha / (1.0 - alpha) * smax;
                nu / (nu + sj)
            }
        };
        for ((uj, dj), &sj) in u.iter_mut().zip(delta).zip(sigma) {
            *uj = dj * factor(sj);
        }
        let m = mahalanobis_norm(&u, sigma);
        if m >= lo && m <= hi {
            let obj: f64 = u.iter().zip(delta).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(obj);
        }
    }
    best
}

/// Random annulus instance; `case` 0 = inside the inner radius, 1 = in the band, 2 = outside.
pub fn mahalanobis_instance<R: Rng>(rng: &mut R, case: usize, max_dim: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64, f64) {
    let d = rng.random_range(1..=max_dim);
    let sigma: Vec<f64> = (0..d).map(|_| log_uniform(rng, 1e-3, 1e3)).collect();
    let x: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
    let r = log_uniform(rng, 0.1, 10.0);
    let gamma = rng.random_range(1.0..4.0);
    let mut dir: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
    let m = mahalanobis_norm(&dir, &sigma);
    let target = match case {
        0 => r * rng.random_range(0.01..0.99),
        1 => r * rng.random_range(1.0..gamma),
        _ => gamma * r * rng.random_range(1.01..5.0),
    };
    dir.iter_mut().for_each(|v| *v *= target / m);
    let z: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
    (x, z, sigma, r, gamma)
}

pub fn mahalanobis_check(instances: usize, oracle_points: usize, seed: u64) -> MahalanobisReport {
    let mut rep = MahalanobisReport::default();
    for k in 0..instances {
        let mut rng = stream_rng(seed, 5000 + k as u64);
        let (x, z, sigma, r, gamma) = mahalanobis_instance(&mut rng, k % 3, 8);
        let ann = MahalanobisAnnulus::new(x.clone(), r, gamma, sigma.clone()).unwrap();
        let res = project_mahalanobis(&z, &ann, DEFAULT_GRID_POINTS, &mut rng).unwrap();
        let u: Vec<f64> = res.point.iter().zip(&x).map(|(a, b)| a - b).collect();
        let delta: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
        let m = mahalanobis_norm(&u, &sigma);
        let feas = (r - m).max(m - gamma * r).max(0.0);
        rep.worst_feasibility = rep.worst_feasibility.max(feas);
        rep.instances += 1;
        if res.active == ActiveConstraint::None {
            assert_eq!(res.point, z, "band case must return z");
            rep.band_cases += 1;
            continue;
        }
        rep.boundary_cases += 1;
        let ours: f64 = u.iter().zip(&delta).map(|(a, b)| (a - b) * (a - b)).sum();
        let oracle = dense_grid_oracle(&delta, &sigma, r, gamma, oracle_points);
        let tol = 1e-3 * oracle;
        rep.worst_objective_rel = rep.worst_objective_rel.max((ours - oracle).abs() / oracle);
        if ours < oracle - tol {
            rep.oracle_beaten += 1;
        }
        match res.multiplier {
            Some(mult) => {
                let tau = mult.tau();
                let resid: f64 = (0..u.len())
                    .map(|j| {
                        let g = (u[j] - delta[j]) + tau * sigma[j] * u[j];
                        g * g
                    })
                    .sum::<f64>()
                    .sqrt();
                rep.worst_kkt = rep.worst_kkt.max(resid);
            }
            None => rep.fallback_cases += 1,
        }
    }
    rep
}

// ---------------------------------------------------------------------------------------
// Euclidean projection

#[derive(Debug, Clone, Default)]
pub struct EuclideanReport {
    pub instances: usize,
    /// Largest deviation from `x + alpha (z - x)` with alpha from the case formula.
    pub worst_alpha_formula: f64,
    /// Largest amount by which a sampled feasible point beat the closed form.
    pub worst_sample_gain: f64,
    /// Largest gap between the best sample and the closed form, relative to the slack.
    pub worst_slack_ratio: f64,
    pub worst_feasibility: f64,
}

pub fn euclidean_check(instances: usize, samples: usize, seed: u64) -> EuclideanReport {
    let mut rep = EuclideanReport::default();
    for k in 0..instances {
        let mut rng = stream_rng(seed, 9000 + k as u64);
        let d = rng.random_range(1..=3);
        let x: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let r = log_uniform(&mut rng, 0.1, 10.0);
        let gamma = rng.random_range(1.0..4.0);
        let scale = match k % 3 {
            0 => rng.random_range(0.01..0.99) * r,
            1 => rng.random_range(1.0..gamma) * r,
            _ => rng.random_range(1.01..5.0) * gamma * r,
        };
        let mut dir: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v *= scale / dn);
        let z: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + b).collect();

        let ann = EuclideanAnnulus::new(x.clone(), r, gamma).unwrap();
        let res = project_euclidean(&z, &ann, &mut rng).unwrap();

        let beta = z.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let alpha = if beta <= r {
            r / beta
        } else if beta >= gamma * r {
            gamma * r / beta
        } else {
            1.0
        };
        let mut h: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
        for j in 0..d {
            let expect = x[j] + alpha * h[j];
            rep.worst_alpha_formula = rep.worst_alpha_formula.max((res.point[j] - expect).abs() / expect.abs().max(1.0));
        }
        // displacement form agrees with the point form
        project_displacement(&mut h, r, gamma, &mut rng);
        for j in 0..d {
            rep.worst_alpha_formula = rep.worst_alpha_formula.max((x[j] + h[j] - res.point[j]).abs() / res.point[j].abs().max(1.0));
        }

        let obj = |u: &[f64]| u.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let ours = obj(&res.point);
        let nrm = res.point.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        rep.worst_feasibility = rep.worst_feasibility.max((r - nrm).max(nrm - gamma * r).max(0.0));

        // Brute force over random feasible points (direction uniform, radius uniform).
        let mut best = f64::INFINITY;
        let mut u = vec![0.0; d];
        for _ in 0..samples {
            let mut g: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let rho = rng.random_range(r..=gamma * r);
            g.iter_mut().for_each(|v| *v *= rho / gn);
            for j in 0..d {
                u[j] = x[j] + g[j];
            }
            best = best.min(obj(&u));
        }
        rep.worst_sample_gain = rep.worst_sample_gain.max((ours - best) / ours.max(1e-12));
        // Sampling slack: typical spacing of the samples in the annulus, squared in objective units.
        let spacing = gamma * r * 2.0 * std::f64::consts::PI / (samples as f64).powf(1.0 / d as f64) * 4.0;
        let slack = 2.0 * ours.sqrt() * spacing + spacing * spacing;
        rep.worst_slack_ratio = rep.worst_slack_ratio.max((best - ours) / slack);
        rep.instances += 1;
    }
    rep
}

// ---------------------------------------------------------------------------------------
// metrics

#[derive(Debug, Clone, Default)]
pub struct MetricReport {
    pub instances: usize,
    pub auroc_mismatches: usize,
    pub fpr_violations: usize,
    pub flag_count_mismatches: usize,
}

fn pair_count_auroc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut twice_wins = 0u64;
    for p in pos {
        for n in neg {
            twice_wins += if p > n {
                2
            } else if p == n {
                1
            } else {
                0
            };
        }
    }
    (twice_wins as f64 / 2.0) / (pos.len() as f64 * neg.len() as f64)
}

pub fn metric_check(instances: usize, seed: u64) -> MetricReport {
    let mut rep = MetricReport::default();
    for k in 0..instances {
        let mut rng = stream_rng(seed, 20_000 + k as u64);
        let np = rng.random_range(1..=250);
        let nn = rng.random_range(1..=250);
        // coarse score levels force plenty of ties
        let levels = rng.random_range(2..=40) as f64;
        let shift = rng.random_range(-1.0..2.0);
        let mut draw = |shift: f64| ((normal(&mut rng) + shift) * levels / 4.0).round() / levels;
        let pos: Vec<f64> = (0..np).map(|_| draw(shift)).collect();
        let neg: Vec<f64> = (0..nn).map(|_| draw(0.0)).collect();
        let set = ScoredSet::from_parts(&pos, &neg).unwrap();
        if auroc(&set).unwrap() != pair_count_auroc(&pos, &neg) {
            rep.auroc_mismatches += 1;
        }
        for fpr in [0.01, 0.03, 0.05, 0.1, 0.25, 0.5] {
            let (_, thr) = recall_at_fpr(&pos, &neg, fpr).unwrap();
            let realized = neg.iter().filter(|&&s| s > thr).count() as f64 / nn as f64;
            if realized > fpr {
                rep.fpr_violations += 1;
            }
        }
        let n = np + nn;
        let ratio = rng.random_range(0.02..0.9);
        let expect = (ratio * n as f64).round() as usize;
        if expect >= 1 && expect < n {
            let f1 = f1_at_contamination(&set, ratio).unwrap();
            let below = set.scores.iter().filter(|&&s| s < f1.threshold).count();
            let at = set.scores.iter().filter(|&&s| s == f1.threshold).count();
            // exactly `expect` rows flagged, all of them scoring at or below the threshold
            if f1.flagged != expect || below > expect || below + at < expect {
                rep.flag_count_mismatches += 1;
            }
        }
        rep.instances += 1;
    }
    rep
}

// ---------------------------------------------------------------------------------------
// distributions

/// Kolmogorov-Smirnov statistic of `samples` against the continuous CDF `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
