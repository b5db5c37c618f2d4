use drocc_core::data::{gen_ball, gen_sine2d, gen_sine_displaced, normalize_isotropic, Dataset};
use drocc_core::drocc::{adversarial_search, negative_label_loss, random_negatives, train, DroccConfig, NegativeMode};
use drocc_core::eval::{auroc, ScoredSet};
use drocc_core::lf::{lf_adversarial_search, train_lf, train_oe, LfConfig, SigmaMode, SigmaWeights};
use drocc_core::nd::{Activation, Label, MlpModel, Tensor2};
use drocc_core::projection::SIGMA_FLOOR;
use drocc_core::rng::{stream_rng, streams};

fn init(dims: &[usize], seed: u64) -> MlpModel {
    MlpModel::new(dims, Activation::Relu, &mut stream_rng(seed, streams::INIT)).unwrap()
}

fn small_cfg(seed: u64) -> DroccConfig {
    DroccConfig {
        radius: Some(0.3),
        epochs: 3,
        warmup_steps: 5,
        batch_size: 32,
        seed,
        ..Default::default()
    }
}

fn labeled(pos: &Tensor2, neg: &Tensor2) -> Dataset {
    let p = Dataset::new(pos.clone(), vec![Label::Positive; pos.rows()]).unwrap();
    let n = Dataset::new(neg.clone(), vec![Label::Negative; neg.rows()]).unwrap();
    p.concat(&n).unwrap()
}

#[test]
fn identical_configs_give_identical_reports() {
    let x = gen_ball(200, 3, 1).unwrap().features;
    let a = train(init(&[3, 16, 1], 1), &x, &small_cfg(4)).unwrap();
    let b = train(init(&[3, 16, 1], 1), &x, &small_cfg(4)).unwrap();
    assert!(a.same_outcome(&b));
    let c = train(init(&[3, 16, 1], 1), &x, &small_cfg(5)).unwrap();
    assert!(!a.same_outcome(&c));

    let neg = gen_ball(20, 3, 9).unwrap().features;
    let ds = labeled(&x, &neg);
    let cfg = LfConfig {
        base: small_cfg(4),
        ..Default::default()
    };
    let a = train_lf(init(&[3, 16, 1], 1), &ds, &cfg).unwrap();
    let b = train_lf(init(&[3, 16, 1], 1), &ds, &cfg).unwrap();
    assert!(a.same_outcome(&b));
}

#[test]
fn zero_mu_ignores_the_adversarial_term() {
    let x = gen_ball(200, 3, 2).unwrap().features;
    let cfg = DroccConfig {
        mu: 0.0,
        ..small_cfg(1)
    };
    let ascent = train(init(&[3, 16, 1], 2), &x, &cfg).unwrap();
    let random = train(
        init(&[3, 16, 1], 2),
        &x,
        &DroccConfig {
            mode: NegativeMode::Random,
            ..cfg.clone()
        },
    )
    .unwrap();
    // the generated points differ, yet the parameters follow the positive-only path
    assert_eq!(ascent.model, random.model);
    assert_ne!(ascent.epochs[0].adversarial, random.epochs[0].adversarial);
    for e in &ascent.epochs {
        assert!(e.adversarial.is_finite() && e.adversarial > 0.0);
        assert_eq!(e.total, e.positive);
    }
}

#[test]
fn ascent_batches_are_harder_than_random_ones() {
    let x = gen_ball(512, 3, 3).unwrap().features;
    let cfg = DroccConfig {
        radius: Some(0.3),
        ascent_step: 0.05,
        epochs: 10,
        ..small_cfg(3)
    };
    let model = train(init(&[3, 32, 32, 1], 3), &x, &cfg).unwrap().model;
    let mut rng = stream_rng(3, 77);
    let (mut asc, mut rnd) = (Vec::new(), Vec::new());
    for b in 0..20 {
        let rows: Vec<usize> = (b * 25..b * 25 + 25).collect();
        let xb = x.select_rows(&rows);
        let h = adversarial_search(&model, &xb, &cfg, &mut rng).unwrap();
        asc.push(negative_label_loss(&model, &xb, &h).unwrap());
        let h = random_negatives(&xb, &cfg, &mut rng);
        rnd.push(negative_label_loss(&model, &xb, &h).unwrap());
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[9] + v[10])
    };
    assert!(median(&mut asc) >= median(&mut rnd), "{asc:?} vs {rnd:?}");
}

#[test]
fn adversarial_points_come_from_positives_only() {
    let x = gen_ball(100, 3, 4).unwrap().features;
    // sentinel negatives far from the data; a search around them would count extra points
    let neg = Tensor2::from_rows(&[[1e3, 1e3, 1e3]; 7]).unwrap();
    let ds = labeled(&x, &neg);
    let cfg = LfConfig {
        base: small_cfg(2),
        ..Default::default()
    };
    let rep = train_lf(init(&[3, 8, 1], 4), &ds, &cfg).unwrap();
    assert_eq!(rep.adversarial_points, 100 * cfg.base.epochs);
    let sigma = rep.sigma.unwrap();
    assert!(sigma.len() == 3 && sigma.iter().all(|&s| s >= SIGMA_FLOOR));
    let rep = train_oe(init(&[3, 8, 1], 4), &ds, &cfg).unwrap();
    assert_eq!(rep.adversarial_points, 100 * cfg.base.epochs);
    assert!(rep.sigma.is_none());
}

#[test]
fn unit_sigma_lf_follows_the_oe_trajectory() {
    let x = gen_ball(150, 3, 5).unwrap().features;
    let neg = gen_ball(15, 3, 6).unwrap().features;
    let ds = labeled(&x, &neg);
    let cfg = LfConfig {
        base: small_cfg(6),
        sigma_mode: SigmaMode::FixedOnes,
        ..Default::default()
    };
    let lf = train_lf(init(&[3, 16, 1], 5), &ds, &cfg).unwrap();
    let oe = train_oe(init(&[3, 16, 1], 5), &ds, &cfg).unwrap();
    assert_eq!(lf.model, oe.model);
    assert_eq!(lf.epochs, oe.epochs);
    assert_eq!(lf.warmup_losses, oe.warmup_losses);
}

#[test]
fn equal_sigma_search_matches_euclidean_search_at_scaled_radius() {
    let x = gen_ball(40, 4, 7).unwrap().features;
    let model = init(&[4, 16, 1], 7);
    let c = 4.0;
    let lf = LfConfig {
        base: DroccConfig {
            radius: Some(0.6),
            ascent_step: 0.05,
            ..Default::default()
        },
        ..Default::default()
    };
    let sigma = SigmaWeights {
        sigma: vec![c; 4],
        floor: SIGMA_FLOOR,
        epoch_stamp: 0,
    };
    let h_lf = lf_adversarial_search(&model, &x, &sigma, &lf, &mut stream_rng(1, 3)).unwrap();
    let euclid = DroccConfig {
        radius: Some(0.6 / c.sqrt()),
        ..lf.base.clone()
    };
    let h_e = adversarial_search(&model, &x, &euclid, &mut stream_rng(1, 3)).unwrap();
    assert_eq!(h_lf, h_e);
}

#[test]
fn oe_on_positives_only_matches_one_class_training() {
    let x = gen_ball(120, 3, 8).unwrap().features;
    let ds = Dataset::new(x.clone(), vec![Label::Positive; 120]).unwrap();
    let cfg = LfConfig {
        base: small_cfg(8),
        ..Default::default()
    };
    let oe = train_oe(init(&[3, 16, 1], 8), &ds, &cfg).unwrap();
    let plain = train(init(&[3, 16, 1], 8), &x, &cfg.base).unwrap();
    assert!(oe.same_outcome(&plain));
}

/// Early epochs lift every logit (the positive term dominates a fresh model), so the trend is
/// measured after that phase and against the initial model.
#[test]
fn known_negatives_are_pushed_down() {
    let x = gen_ball(200, 2, 9).unwrap().features;
    let neg = Tensor2::from_vec(20, 2, (0..40).map(|i| if (i / 2 + i) % 2 == 0 { 3.0 } else { -3.0 }).collect()).unwrap();
    let ds = labeled(&x, &neg);
    let start = init(&[2, 16, 1], 9);
    let mean = |m: &MlpModel| m.forward(&neg).unwrap().iter().sum::<f64>() / 20.0;
    let after = |epochs: usize| {
        let cfg = LfConfig {
            base: DroccConfig {
                epochs,
                ..small_cfg(9)
            },
            ..Default::default()
        };
        mean(&train_oe(start.clone(), &ds, &cfg).unwrap().model)
    };
    let (mid, late) = (after(10), after(60));
    assert!(late < mid && late < mean(&start), "init {} -> {mid} -> {late}", mean(&start));
}

fn sine_train(seed: u64) -> (Tensor2, Dataset) {
    let ds = normalize_isotropic(&gen_sine2d(1000, seed).unwrap()).unwrap();
    (ds.features.clone(), ds)
}

#[test]
fn warmup_loss_trends_down_on_sine() {
    let (x, _) = sine_train(0);
    let cfg = DroccConfig {
        epochs: 0,
        ..Default::default()
    };
    let rep = train(init(&[2, 64, 64, 1], 0), &x, &cfg).unwrap();
    let w = &rep.warmup_losses;
    assert_eq!(w.len(), 100);
    let head = w[..10].iter().sum::<f64>() / 10.0;
    let tail = w[90..].iter().sum::<f64>() / 10.0;
    assert!(tail < head, "{head} -> {tail}");
}

/// A radius far above the data diameter leaves near-manifold negatives unpenalized.
#[test]
fn oversized_radius_degrades_auc() {
    let d = 2.0f64;
    let radii = [d.sqrt() / 2.0, 4.0 * d.sqrt(), 40.0 * d.sqrt()];
    let mut auc = vec![Vec::new(); 3];
    for seed in 0..3 {
        let (x, ds) = sine_train(seed);
        let stats = ds.norm_stats.unwrap();
        let prep = |mut t: Tensor2| {
            for i in 0..t.rows() {
                stats.apply_row(t.row_mut(i));
            }
            t
        };
        let pos = prep(gen_sine2d(500, seed + 1000).unwrap().features);
        let neg = prep(gen_sine_displaced(500, 0.5, seed + 2000).unwrap().features);
        for (k, &r) in radii.iter().enumerate() {
            let cfg = DroccConfig {
                radius: Some(r),
                epochs: 40,
                ascent_step: 0.05,
                seed,
                ..Default::default()
            };
            let m = train(init(&[2, 32, 32, 1], seed), &x, &cfg).unwrap().model;
            let set = ScoredSet::from_parts(&m.forward(&pos).unwrap(), &m.forward(&neg).unwrap()).unwrap();
            auc[k].push(auroc(&set).unwrap());
        }
    }
    let med: Vec<f64> = auc
        .iter()
        .map(|v| {
            let mut v = v.clone();
            v.sort_by(f64::total_cmp);
            v[1]
        })
        .collect();
    assert!(med[0] > med[1] && med[1] >= med[2] - 0.02, "{auc:?}");
}
