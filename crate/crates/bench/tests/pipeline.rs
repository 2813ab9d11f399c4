use cobras::balance::cobras_balance_factors;
use cobras::fom::ConvectiveChain;
use cobras::kernel::{kernel_balance, KernelSpec};
use cobras::FeatureMap;
use cobras_bench::commands::reproduce_toy;
use cobras_bench::results::{read_curve_csv, read_manifest};
use cobras_bench::surrogate::stationary_lti_cobras;
use cobras_bench::system::{training, Fom};
use cobras_bench::toy::fit_projections;
use cobras_bench::{run_toy_experiment, ExperimentConfig, OutputFormat};
use cobras_oracles::{balanced_truncation, principal_angles};
use nalgebra::DMatrix;

fn max_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    principal_angles(a, b).into_iter().fold(0.0, f64::max)
}

#[test]
fn test_seed_does_not_touch_training() {
    let cfg = ExperimentConfig::toy_default();
    let mut other = cfg.clone();
    other.seeds.test = 99;
    let fit = |c: &ExperimentConfig| {
        let fom = Fom::from_config(c).unwrap();
        let t = training(&fom, c).unwrap();
        fit_projections(&fom, c, &t, 2).unwrap().cobras
    };
    let (a, b) = (fit(&cfg), fit(&other));
    assert_eq!(a.phi, b.phi);
    assert_eq!(a.psi, b.psi);

    let mut reseeded = cfg.clone();
    reseeded.seeds.training = 7;
    assert_ne!(fit(&reseeded).psi, a.psi);
}

#[test]
fn toy_ordering_and_sine_run() {
    let results = run_toy_experiment(&ExperimentConfig::toy_default()).unwrap();
    let mean = |m: &str| results.get(m, 2).unwrap().test.mean();
    assert!(mean("cobras") < mean("pod"));
    assert!(mean("cobras") < mean("bpod"));
    let sine = results.get("cobras", 2).unwrap().sine.as_ref().unwrap();
    assert_eq!(sine.divergence_count(), 0);
    assert!(sine.mean().is_finite());
}

#[test]
fn linear_chain_cobras_recovers_balanced_truncation() {
    let cfg = ExperimentConfig::surrogate_lti_default();
    let fom = Fom::from_config(&cfg).unwrap();
    let Fom::Chain(chain) = &fom else { unreachable!() };
    let lin = chain.linear_part();
    for r in [4, 8] {
        let stationary = stationary_lti_cobras(&fom, &cfg, r).unwrap();
        let bt = balanced_truncation(&lin.a, &lin.b, &lin.c, r);
        let angle = max_angle(&stationary.phi, &bt.trial).max(max_angle(&stationary.psi, &bt.test));
        assert!(angle < 1e-2, "r={r}: angle {angle}");
    }
}

#[test]
fn chain_linear_part_matches_direct_construction() {
    let chain = ConvectiveChain::new(50, 0.2, 0.85, 0.0, 5).unwrap();
    let lin = chain.linear_part();
    assert_eq!(lin.a[(1, 0)], 0.85);
    assert_eq!(lin.a[(0, 0)], 0.2);
    assert_eq!(lin.c.row(0).sum(), 5.0);
}

#[test]
fn linear_kernel_pipeline_equals_linear_balancing() {
    let cfg = ExperimentConfig::toy_default();
    let fom = Fom::from_config(&cfg).unwrap();
    let t = training(&fom, &cfg).unwrap();
    let lin = cobras_balance_factors(t.states.data(), t.gradients.data(), 2).unwrap();
    let kern = kernel_balance(&KernelSpec::Linear { alpha: 0.0 }, &t.states, &t.gradients, 2).unwrap();
    for x in t.trajectories.iter().flat_map(|tr| &tr.states) {
        let (a, b) = (kern.features(x), lin.features(x));
        assert!((a - &b).norm() <= 1e-8 * (1.0 + b.norm()));
    }
    assert_eq!(lin.rank(), 2);
}

#[test]
fn emitted_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::toy_default();
    cfg.test.count = 10;
    cfg.output_dir = dir.path().join("toy");
    let manifest = reproduce_toy(&cfg).unwrap();
    assert_eq!(read_manifest(cfg.output_dir.join("manifest.json")).unwrap(), manifest);

    let results = run_toy_experiment(&cfg).unwrap();
    let cobras = results.get("cobras", 2).unwrap();
    let (t, err) = read_curve_csv(cfg.output_dir.join("curves").join(cobras.key()).join("mean.csv")).unwrap();
    assert_eq!(err, cobras.test.mean_curve());
    assert!((t[1] - t[0] - cfg.dt).abs() < 1e-12);

    let (k, sigma) = read_curve_csv(cfg.output_dir.join("spectra").join(format!("{}_sigma.csv", cobras.key()))).unwrap();
    assert_eq!(k[0], 1.0);
    assert!(sigma.windows(2).all(|w| w[0] >= w[1]), "{sigma:?}");
    for f in &manifest.files {
        assert!(cfg.output_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn json_output_writes_curve_documents() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::toy_default();
    cfg.test.count = 5;
    cfg.output_format = OutputFormat::Json;
    cfg.output_dir = dir.path().to_path_buf();
    let manifest = reproduce_toy(&cfg).unwrap();
    assert!(manifest.files.iter().any(|f| f.ends_with(".json") && f.starts_with("curves")));
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn repeated_runs_are_identical() {
    let cfg = ExperimentConfig::toy_default();
    let a = run_toy_experiment(&cfg).unwrap().manifest();
    let b = run_toy_experiment(&cfg).unwrap().manifest();
    assert_eq!(a, b);
}
