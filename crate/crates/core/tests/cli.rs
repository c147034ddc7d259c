use std::path::Path;
use std::process::{Command, Output};

use autoclip::experiments::{encode_idx, load_dataset, DataFormat, DatasetSource, PrivacyConfig, RunConfig, RunManifest, METRICS_HEADER};
use autoclip::models::SyntheticSpec;
use autoclip::{ClipPolicy, ModelSpec, OptimizerConfig, OptimizerKind};

fn autoclip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autoclip")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn base_config() -> RunConfig {
    RunConfig {
        experiment: "cli".into(),
        model: ModelSpec::logistic(4),
        dataset: DatasetSource::Synthetic(SyntheticSpec::gauss2class(1, 300, 4, vec![1.0])),
        test_dataset: Some(DatasetSource::Synthetic(SyntheticSpec::gauss2class(2, 200, 4, vec![1.0]))),
        policy: ClipPolicy::auto_s(1.0, 0.01),
        optimizer: OptimizerConfig::new(OptimizerKind::Sgd, 0.5),
        privacy: PrivacyConfig::budget(3.0, 1e-5),
        batch_size: 60.0,
        epochs: 2.0,
        seed: 3,
        out_dir: None,
    }
}

fn write_config(dir: &Path, name: &str, c: &RunConfig) -> String {
    let p = dir.join(name);
    std::fs::write(&p, c.to_json().unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn calibrate_prints_sigma_and_is_deterministic() {
    let args = ["calibrate", "--eps", "3", "--delta", "1e-5", "--sample-rate", "0.008533", "--steps", "4688"];
    let a = autoclip(&args);
    assert_eq!(code(&a), 0);
    let out = stdout(&a);
    let sigma: f64 = out.lines().next().unwrap().trim_start_matches("sigma = ").parse().unwrap();
    assert!((0.5..=5.0).contains(&sigma));
    let json: serde_json::Value = serde_json::from_str(&out[out.find('{').unwrap()..]).unwrap();
    assert!((json["eps_roundtrip"].as_f64().unwrap() - 3.0).abs() <= 0.03);
    assert_eq!(a.stdout, autoclip(&args).stdout);
}

#[test]
fn usage_errors_exit_one() {
    let o = autoclip(&["calibrate", "--eps", "0", "--delta", "1e-5", "--sample-rate", "0.01", "--steps", "10"]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&autoclip(&["bogus"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let o = autoclip(&["theory-curves", "--gamma", "0", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn unreachable_budget_exits_two() {
    let o = autoclip(&["calibrate", "--eps", "1e-6", "--delta", "1e-5", "--sample-rate", "1", "--steps", "1000"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn train_writes_manifest_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.json", &base_config());
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    let o = autoclip(&["train", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.log.len() as u64, m.steps);
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), METRICS_HEADER.join(","));
    assert_eq!(csv.lines().count() as u64, m.steps + 2);
    assert!(csv.lines().last().unwrap().starts_with("final,"));
    assert!(m.final_metrics.test_accuracy.unwrap() > 0.8);

    // Same seed: identical manifest apart from wall time.
    let again = dir.path().join("again");
    std::fs::create_dir(&again).unwrap();
    assert_eq!(code(&autoclip(&["train", "--config", &cfg, "--out-dir", again.to_str().unwrap()])), 0);
    let mut n: RunManifest = serde_json::from_str(&std::fs::read_to_string(again.join("manifest.json")).unwrap()).unwrap();
    n.wall_time_s = m.wall_time_s;
    n.config.out_dir = m.config.out_dir.clone();
    assert_eq!(n, m);
    assert_eq!(std::fs::read(again.join("metrics.csv")).unwrap(), csv.as_bytes());
}

#[test]
fn missing_dataset_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = base_config();
    c.dataset = DatasetSource::Csv { path: dir.path().join("absent.csv") };
    let cfg = write_config(dir.path(), "run.json", &c);
    let o = autoclip(&["train", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = base_config();
    c.model = ModelSpec::mlp(vec![4, 8, 1], autoclip::models::Activation::Relu, autoclip::models::LossKind::Mse);
    c.policy = ClipPolicy::auto_s_free(1e-6);
    c.privacy = PrivacyConfig::noise(0.0, 1e-5);
    c.optimizer = OptimizerConfig::new(OptimizerKind::Sgd, 1e300);
    let cfg = write_config(dir.path(), "run.json", &c);
    let o = autoclip(&["train", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numeric abort"));
}

#[test]
fn equivalence_pass_and_expected_negative_control() {
    let o = autoclip(&["equivalence", "--kind", "sgd", "--steps", "100", "--trials", "5"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS"));
    assert_eq!(stdout(&o).lines().count(), 6);
    assert_eq!(code(&autoclip(&["equivalence", "--kind", "adamw", "--steps", "100"])), 0);
    let c = autoclip(&["equivalence", "--kind", "adam", "--steps", "50", "--trials", "2", "--control"]);
    assert_eq!(code(&c), 0);
    assert!(String::from_utf8_lossy(&c.stderr).contains("expected-negative"));
}

#[test]
fn theory_curves_write_three_csvs_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let o = autoclip(&["theory-curves", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for f in ["auto_v.csv", "auto_s.csv", "sgd_baseline.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.lines().any(|l| l == "t,bound"), "{f}");
    }
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("slopes.json")).unwrap()).unwrap();
    assert!((s["auto_s_slope"].as_f64().unwrap() + 0.25).abs() <= 0.03);
    assert!(s["auto_v_min"].as_f64().unwrap() >= 25.0);
}

#[test]
fn lazy_region_columns() {
    let o = autoclip(&["lazy-region", "--setting", "logistic", "--grid", "11"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("# "));
    assert!(text.lines().any(|l| l == "theta,standard,abadi,auto_v,auto_s"));
    assert_eq!(text.lines().count(), 13);
    assert_eq!(code(&autoclip(&["lazy-region", "--setting", "mean", "--grid", "10"])), 1);
}

#[test]
fn similarity_on_an_idx_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let n = 40;
    let pixels: Vec<u8> = (0..n * 4).map(|i| ((i * 37) % 256) as u8).collect();
    let labels: Vec<u8> = (0..n).map(|i| (i % 3) as u8).collect();
    let (img, lab) = encode_idx(&pixels, n, 2, 2, &labels).unwrap();
    let img_path = dir.path().join("t10k-images-idx3-ubyte");
    std::fs::write(&img_path, img).unwrap();
    std::fs::write(dir.path().join("t10k-labels-idx1-ubyte"), lab).unwrap();
    assert_eq!(load_dataset(&img_path, DataFormat::Idx).unwrap().len(), n);

    let o = autoclip(&["similarity", "--dataset", img_path.to_str().unwrap(), "--format", "idx", "--steps", "5", "--batch-size", "10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "step,dot_abadi,dot_auto_v,frac_positive_alignment");
    assert!(text.lines().count() > 1);
}
