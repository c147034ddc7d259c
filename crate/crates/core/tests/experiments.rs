use rand::Rng;

use autoclip::experiments::{
    dot_similarity, encode_idx, lazy_gradients, load_idx, run_training, DatasetSource, LazySetting, PrivacyConfig, RunConfig,
};
use autoclip::models::SyntheticSpec;
use autoclip::{ClipPolicy, Matrix, ModelSpec, OptimizerConfig, RngStream};

#[test]
fn noiseless_full_batch_loss_is_monotone() {
    let config = RunConfig {
        experiment: "noiseless".into(),
        model: ModelSpec::logistic(10),
        dataset: DatasetSource::Synthetic(SyntheticSpec::gauss2class(4, 500, 10, vec![0.5])),
        test_dataset: None,
        policy: ClipPolicy::auto_s_free(0.01),
        optimizer: OptimizerConfig::sgd(0.05),
        privacy: PrivacyConfig::noise(0.0, 1e-5),
        batch_size: 1000.0,
        epochs: 50.0,
        seed: 0,
        out_dir: None,
    };
    let m = run_training(&config).unwrap();
    assert_eq!(m.steps, 50);
    let losses: Vec<f64> = m.log.iter().map(|s| s.loss.unwrap()).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
}

#[test]
fn oracle_factor_dominates_on_random_batches() {
    let mut g = RngStream::new(9, "batches").generator();
    for _ in 0..100 {
        let b = g.random_range(1..20);
        let rows: Vec<Vec<f64>> = (0..b).map(|_| (0..5).map(|_| g.random_range(-2.0..2.0) + 0.3).collect()).collect();
        let s = dot_similarity(&Matrix::from_rows(&rows).unwrap(), 0.1).unwrap();
        assert!(s.dot_oracle >= s.dot_abadi - 1e-12 && s.dot_oracle >= s.dot_auto_v - 1e-12, "{s:?}");
    }
}

#[test]
fn auto_v_matches_abadi_when_every_norm_exceeds_r() {
    let rows = vec![vec![1.0, 2.0], vec![0.5, -0.3], vec![3.0, 1.0]];
    let s = dot_similarity(&Matrix::from_rows(&rows).unwrap(), 0.1).unwrap();
    assert!(s.dot_auto_v >= s.dot_abadi - 1e-12);
    let single = dot_similarity(&Matrix::from_rows(&[vec![0.6, 0.8]]).unwrap(), 0.1).unwrap();
    assert!((single.dot_auto_v - 0.1).abs() < 1e-15);
}

#[test]
fn lazy_logistic_at_one() {
    let s = LazySetting::Logistic;
    let row = lazy_gradients(s, &s.dataset(0).unwrap(), 1.0, 0.01, 0.01).unwrap().per_unit_threshold(0.01);
    assert!(row.auto_v.abs() <= 0.02 * row.standard.abs());
    assert!(row.abadi.abs() <= 0.02 * row.standard.abs());
    assert_eq!(row.auto_s.signum(), row.standard.signum());
    assert!(row.auto_s.abs() >= 0.05 * row.standard.abs());
}

#[test]
fn idx_subset_shape() {
    // A 1000-image stand-in with the usual 28x28 layout and ten classes.
    let n = 1000;
    let pixels: Vec<u8> = (0..n * 784).map(|i| (i * 7 % 256) as u8).collect();
    let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    let (img, lab) = encode_idx(&pixels, n, 28, 28, &labels).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("images"), dir.path().join("labels"));
    std::fs::write(&ip, img).unwrap();
    std::fs::write(&lp, lab).unwrap();
    let d = load_idx(&ip, &lp, None).unwrap();
    assert_eq!((d.len(), d.width()), (1000, 784));
    assert!(d.features.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    let mut classes: Vec<u64> = d.labels.iter().map(|&y| y as u64).collect();
    classes.dedup();
    classes.sort();
    classes.dedup();
    assert_eq!(classes, (0..10).collect::<Vec<_>>());
    assert_eq!(load_idx(&ip, &lp, Some(100)).unwrap().len(), 100);
}
