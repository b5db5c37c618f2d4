mod oracles;

use drocc_core::data::{gen_ball, load_csv, normalize, split, write_csv, Dataset, Split};
use drocc_core::nd::{Label, Tensor2};
use drocc_core::rng::stream_rng;
use rand::Rng;

#[test]
fn hundred_row_csv_round_trip_is_bitwise() {
    let mut rng = stream_rng(0, 0);
    let n = 100;
    let feats: Vec<f64> = (0..n * 5)
        .map(|i| match i % 5 {
            0 => rng.random::<f64>() * 1e-300,
            1 => -rng.random::<f64>() * 1e300,
            _ => rng.random_range(-10.0..10.0),
        })
        .collect();
    let labels = (0..n).map(|i| if i % 7 == 0 { Label::Negative } else { Label::Positive }).collect();
    let ds = Dataset::new(Tensor2::from_vec(n, 5, feats).unwrap(), labels).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for name in ["d.csv", "d.csv.gz"] {
        let p = dir.path().join(name);
        write_csv(&ds, &p, "label", "normal", "anomaly").unwrap();
        let back = load_csv(&p, "label", "normal").unwrap();
        let bits = |t: &Tensor2| t.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.features), bits(&ds.features));
        assert_eq!(back.labels, ds.labels);
    }
}

#[test]
fn ball_radius_law() {
    for d in [1, 3, 10] {
        let x = gen_ball(100_000, d, 4).unwrap().features;
        let radii: Vec<f64> = x.iter_rows().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let ks = oracles::ks_statistic(&radii, |p| p.powi(d as i32));
        assert!(ks < 0.02, "d={d}: KS {ks}");
    }
}

#[test]
fn normalization_statistics_come_from_train_rows() {
    let ds = gen_ball(300, 4, 1).unwrap();
    let mut ds = split(&ds, [0.6, 0.2, 0.2], 3).unwrap();
    // shift the test rows; the fitted statistics must not move
    for i in ds.indices(Split::Test) {
        ds.features.row_mut(i).iter_mut().for_each(|v| *v += 50.0);
    }
    let a = normalize(&ds).unwrap();
    let train = a.subset(Split::Train);
    for j in 0..4 {
        let m = train.features.iter_rows().map(|r| r[j]).sum::<f64>() / train.len() as f64;
        assert!(m.abs() < 1e-10);
    }
    let unshifted = split(&gen_ball(300, 4, 1).unwrap(), [0.6, 0.2, 0.2], 3).unwrap();
    assert_eq!(a.norm_stats, normalize(&unshifted).unwrap().norm_stats);
}
