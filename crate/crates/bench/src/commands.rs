//! Implementations of the command-line subcommands. Each one reads the
//! experiment config and writes its artifacts under `output_dir`.

use std::path::{Path, PathBuf};

use cobras::balance::{bpod_projection, cobras_balance, pod_basis, BalancedProjection, PodBasis, ProjectionBasis};
use cobras::io::{read_matrix_csv, read_values_csv, write_matrix_csv, write_values_csv};
use cobras::kernel::{kernel_balance, KernelFeatureMap, KpcaMap};
use cobras::rom::{LearnedRom, RomRun};
use cobras::sampling::SnapshotMatrix;
use nalgebra::DMatrix;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, BenchResult};
use crate::eval::evaluate;
use crate::results::{emit_results, result_key, ExperimentResults, MethodResult, ResultManifest};
use crate::surrogate::{fit_learned, run_surrogate_experiment};
use crate::system::{test_set, training, training_trajectories, Fom, Training};
use crate::toy::run_toy_experiment;

const SAMPLES: &str = "samples";
const MODELS: &str = "models";
/// Galerkin methods handled by `rom` and `evaluate`.
pub const PROJECTION_METHODS: [&str; 3] = ["cobras", "pod", "bpod"];

fn model_dir(cfg: &ExperimentConfig, method: &str, r: usize) -> PathBuf {
    cfg.output_dir.join(MODELS).join(result_key(method, r, cfg.seeds.training))
}

/// Writes the training impulse responses, the test impulse responses and
/// the sine-forced run as CSV trajectories.
pub fn simulate(cfg: &ExperimentConfig) -> BenchResult<Vec<PathBuf>> {
    let fom = Fom::from_config(cfg)?;
    let sys = fom.system();
    let dir = cfg.output_dir.join("trajectories");
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for (i, traj) in training_trajectories(&fom, cfg)?.iter().enumerate() {
        let path = dir.join(format!("train_{i:03}.csv"));
        traj.write_csv(sys, &path)?;
        written.push(path);
    }
    let tests = test_set(&fom, cfg)?;
    let cases = tests.impulses.iter().enumerate().map(|(i, c)| (format!("test_{i:03}.csv"), c));
    for (name, case) in cases.chain(tests.sine.iter().map(|c| ("sine.csv".to_string(), c))) {
        let traj = cobras::fom::simulate(sys, &case.x0, &case.inputs, cfg.dt)?;
        let path = dir.join(name);
        traj.write_csv(sys, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Builds and saves the state and gradient sample matrices.
pub fn sample(cfg: &ExperimentConfig) -> BenchResult<Training> {
    let fom = Fom::from_config(cfg)?;
    let t = training(&fom, cfg)?;
    let dir = cfg.output_dir.join(SAMPLES);
    t.states.save(&dir, "states")?;
    t.gradients.save(&dir, "gradients")?;
    Ok(t)
}

/// Training data, reusing saved samples when present.
pub fn load_or_sample(cfg: &ExperimentConfig) -> BenchResult<Training> {
    let dir = cfg.output_dir.join(SAMPLES);
    if !dir.join("states.csv").exists() || !dir.join("gradients.csv").exists() {
        return sample(cfg);
    }
    let fom = Fom::from_config(cfg)?;
    Ok(Training {
        trajectories: training_trajectories(&fom, cfg)?,
        states: SnapshotMatrix::load(&dir, "states")?,
        gradients: SnapshotMatrix::load(&dir, "gradients")?,
    })
}

pub fn fit_cobras(cfg: &ExperimentConfig) -> BenchResult<Vec<BalancedProjection>> {
    let t = load_or_sample(cfg)?;
    cfg.ranks
        .iter()
        .map(|&r| {
            let p = cobras_balance(&t.states, &t.gradients, r)?;
            p.save(model_dir(cfg, "cobras", r))?;
            Ok(p)
        })
        .collect()
}

pub fn fit_pod(cfg: &ExperimentConfig) -> BenchResult<Vec<PodBasis>> {
    let t = load_or_sample(cfg)?;
    cfg.ranks
        .iter()
        .map(|&r| {
            let p = pod_basis(&t.states, r)?;
            let dir = model_dir(cfg, "pod", r);
            std::fs::create_dir_all(&dir)?;
            write_matrix_csv(&p.modes, dir.join("modes.csv"))?;
            write_values_csv(&p.singular_values, dir.join("sigma.csv"))?;
            Ok(p)
        })
        .collect()
}

pub fn fit_bpod(cfg: &ExperimentConfig) -> BenchResult<Vec<BalancedProjection>> {
    let lti = Fom::from_config(cfg)?.linear_model()?;
    cfg.ranks
        .iter()
        .map(|&r| {
            let p = bpod_projection(&*lti, cfg.bpod.horizon, r, cfg.bpod.output_rank)?;
            p.save(model_dir(cfg, "bpod", r))?;
            Ok(p)
        })
        .collect()
}

/// Kernel feature maps at the learned-model dimension, or at every
/// configured rank when no learned model is configured.
pub fn fit_kcobras(cfg: &ExperimentConfig) -> BenchResult<Vec<KernelFeatureMap>> {
    let t = load_or_sample(cfg)?;
    let ranks = match &cfg.learned {
        Some(l) => vec![l.features],
        None => cfg.ranks.clone(),
    };
    ranks
        .into_iter()
        .map(|r| {
            let map = kernel_balance(&cfg.kernel, &t.states, &t.gradients, r)?;
            map.save(model_dir(cfg, "kcobras", r))?;
            Ok(map)
        })
        .collect()
}

fn learned_config(cfg: &ExperimentConfig) -> BenchResult<&crate::config::LearnedConfig> {
    cfg.learned.as_ref().ok_or_else(|| BenchError::Config("the [learned] section is required".into()))
}

/// Fits and saves the K-CoBRAS and KPCA learned models.
pub fn learn(cfg: &ExperimentConfig) -> BenchResult<()> {
    let l = learned_config(cfg)?;
    let t = load_or_sample(cfg)?;
    let models = fit_learned(cfg, l, &t)?;
    let kc = model_dir(cfg, "kcobras-krr", l.features);
    models.kcobras.save(&kc)?;
    models.kcobras.feature_map.save(kc.join("feature_map"))?;
    models.kpca.save(model_dir(cfg, "kpca-krr", l.features))?;
    Ok(())
}

fn load_projection(cfg: &ExperimentConfig, method: &str, r: usize) -> BenchResult<Box<dyn ProjectionBasis>> {
    let dir = model_dir(cfg, method, r);
    if !dir.exists() {
        return Err(BenchError::Config(format!("no fitted model at {}; run `{method}` first", dir.display())));
    }
    Ok(if method == "pod" {
        Box::new(PodBasis { modes: read_matrix_csv(dir.join("modes.csv"))?, singular_values: read_values_csv(dir.join("sigma.csv"))? })
    } else {
        Box::new(BalancedProjection::load(dir)?)
    })
}

fn spectrum_of(cfg: &ExperimentConfig, method: &str, r: usize) -> BenchResult<Vec<f64>> {
    Ok(read_values_csv(model_dir(cfg, method, r).join("sigma.csv"))?)
}

fn write_outputs(run: &RomRun, path: &Path) -> BenchResult<()> {
    if run.outputs.is_empty() {
        return Ok(());
    }
    let cols: Vec<_> = run.outputs.to_vec();
    Ok(write_matrix_csv(&DMatrix::from_columns(&cols).transpose(), path)?)
}

/// Runs every saved Galerkin ROM on the test set and writes its outputs,
/// one row per time sample.
pub fn rom(cfg: &ExperimentConfig) -> BenchResult<Vec<PathBuf>> {
    let fom = Fom::from_config(cfg)?;
    let tests = test_set(&fom, cfg)?;
    let mut written = Vec::new();
    for &r in &cfg.ranks {
        for method in PROJECTION_METHODS {
            let basis = load_projection(cfg, method, r)?;
            let run = fom.galerkin_runner(&*basis)?;
            let dir = cfg.output_dir.join("rom").join(result_key(method, r, cfg.seeds.training));
            std::fs::create_dir_all(&dir)?;
            for (i, case) in tests.impulses.iter().enumerate() {
                let path = dir.join(format!("test_{i:03}.csv"));
                write_outputs(&run(&case.x0, &case.inputs), &path)?;
                written.push(path);
            }
            if let Some(case) = &tests.sine {
                let path = dir.join("sine.csv");
                write_outputs(&run(&case.x0, &case.inputs), &path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Error curves of every saved model on the test set.
pub fn evaluate_saved(cfg: &ExperimentConfig) -> BenchResult<ResultManifest> {
    let fom = Fom::from_config(cfg)?;
    let tests = test_set(&fom, cfg)?;
    let seed = cfg.seeds.training;
    let mut results = ExperimentResults::new("evaluate", cfg.hash(), cfg.dt);
    for &r in &cfg.ranks {
        for method in PROJECTION_METHODS {
            let basis = load_projection(cfg, method, r)?;
            let (test, sine) = fom.evaluate_projection(&*basis, &tests)?;
            let spectrum = Some(spectrum_of(cfg, method, r)?);
            results.insert(MethodResult { method: method.into(), r, seed, test, sine, spectrum });
        }
    }
    if let Some(l) = &cfg.learned {
        let kc_dir = model_dir(cfg, "kcobras-krr", l.features);
        let kp_dir = model_dir(cfg, "kpca-krr", l.features);
        if kc_dir.exists() && kp_dir.exists() {
            let sys = fom.system();
            let kc = LearnedRom::load(&kc_dir, KernelFeatureMap::load(kc_dir.join("feature_map"))?)?;
            let t = load_or_sample(cfg)?;
            let kp = LearnedRom::load(&kp_dir, KpcaMap::fit(&cfg.kernel, &t.states, l.features)?)?;
            let (test, sine) = evaluate(&tests, |x0, u| kc.simulate(x0, u, Some(sys)))?;
            let spectrum = Some(kc.feature_map.spectrum().to_vec());
            results.insert(MethodResult { method: "kcobras-krr".into(), r: l.features, seed, test, sine, spectrum });
            let (test, sine) = evaluate(&tests, |x0, u| kp.simulate(x0, u, Some(sys)))?;
            results.insert(MethodResult { method: "kpca-krr".into(), r: l.features, seed, test, sine, spectrum: None });
        }
    }
    emit_results(&results, cfg.output_dir.join("evaluation"), cfg.output_format)
}

pub fn reproduce_toy(cfg: &ExperimentConfig) -> BenchResult<ResultManifest> {
    let results = run_toy_experiment(cfg)?;
    emit_results(&results, &cfg.output_dir, cfg.output_format)
}

pub fn surrogate(cfg: &ExperimentConfig) -> BenchResult<ResultManifest> {
    let results = run_surrogate_experiment(cfg)?;
    emit_results(&results, &cfg.output_dir, cfg.output_format)
}
