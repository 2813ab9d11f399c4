//! Desk-scale comparison on a non-normal convective chain: POD, BPOD and
//! CoBRAS Petrov-Galerkin ROMs, plus K-CoBRAS and KPCA features with
//! dynamics and reconstruction learned by kernel ridge regression.

use cobras::balance::{bpod_snapshots, cobras_balance, cobras_balance_factors, pod_basis, BalancedProjection};
use cobras::features::LinearCoordinates;
use cobras::fom::{simulate, Trajectory};
use cobras::kernel::{kernel_balance, KernelFeatureMap, KernelSpec, KpcaMap};
use cobras::linalg::principal_angles;
use cobras::rng;
use cobras::rom::{learn_feature_rom, LearnedRom};
use cobras::sampling::{sample_gradients_stationary, GradientSampleSpec};
use cobras::FeatureMap;
use nalgebra::{DMatrix, DVector};

use crate::config::{ExperimentConfig, LearnedConfig, SystemConfig};
use crate::error::{BenchError, BenchResult};
use crate::eval::evaluate;
use crate::results::{ExperimentResults, MethodResult};
use crate::system::{test_set, training, Fom, Training};
use crate::toy::{fit_projections, projection_results};

/// CoBRAS on the linearization with impulse-response states and stationary
/// adjoint gradients. For a linear model the gradients do not depend on
/// the state, so every mini-trajectory sits at rest.
pub fn stationary_lti_cobras(fom: &Fom, cfg: &ExperimentConfig, r: usize) -> BenchResult<BalancedProjection> {
    let lti = fom.linear_model()?;
    let horizon = cfg.bpod.horizon;
    let (x, _) = bpod_snapshots(&*lti, horizon, cfg.bpod.output_rank)?;
    let scale = 1.0 / (x.ncols() as f64).sqrt();
    let rest = Trajectory {
        states: vec![DVector::zeros(lti.state_dim()); horizon + 1],
        inputs: vec![DVector::zeros(lti.input_dim()); horizon],
        t0: 0,
        dt: cfg.dt,
    };
    let spec = GradientSampleSpec {
        horizon,
        samples: cfg.bpod.stationary_samples,
        eta: cfg.eta,
        seed: rng::derive_seed(cfg.seeds.training, "stationary"),
    };
    let y = sample_gradients_stationary(&*lti, &vec![rest; cfg.bpod.stationary_samples], &spec)?;
    Ok(cobras_balance_factors(&(x * scale), y.data(), r)?)
}

fn max_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> BenchResult<f64> {
    Ok(principal_angles(a, b)?.into_iter().fold(0.0, f64::max))
}

/// Relative square error `Σ‖ĉ − c‖² / Σ‖c‖²` of the linear coordinates
/// reconstructed from features along a trajectory.
pub fn reconstruction_error<F: FeatureMap>(rom: &LearnedRom<F>, traj: &Trajectory) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for x in &traj.states {
        let c = rom.linear.encoder.tr_mul(x);
        let c_hat = rom.reconstruction.predict(&rom.feature_map.features(x));
        num += (c_hat - &c).norm_squared();
        den += c.norm_squared();
    }
    num / den
}

/// K-CoBRAS features paired with the leading linear CoBRAS coordinates, and
/// KPCA features paired with the leading POD coordinates.
#[derive(Debug, Clone)]
pub struct LearnedModels {
    pub kcobras: LearnedRom<KernelFeatureMap>,
    pub kpca: LearnedRom<KpcaMap>,
}

pub fn fit_learned(cfg: &ExperimentConfig, l: &LearnedConfig, training: &Training) -> BenchResult<LearnedModels> {
    let kcobras = kernel_balance(&cfg.kernel, &training.states, &training.gradients, l.features)?;
    let kpca = KpcaMap::fit(&cfg.kernel, &training.states, l.features)?;
    let linear = cobras_balance(&training.states, &training.gradients, l.linear)?;
    let pod = pod_basis(&training.states, l.linear)?;
    let cobras_coords = LinearCoordinates { encoder: linear.psi, decoder: linear.phi };
    let pod_coords = LinearCoordinates { encoder: pod.modes.clone(), decoder: pod.modes };
    Ok(LearnedModels {
        kcobras: learn_feature_rom(kcobras, &training.trajectories, cobras_coords, &l.cv)?,
        kpca: learn_feature_rom(kpca, &training.trajectories, pod_coords, &l.cv)?,
    })
}

pub fn run_surrogate_experiment(cfg: &ExperimentConfig) -> BenchResult<ExperimentResults> {
    cfg.validate()?;
    let SystemConfig::Chain { cubic, .. } = cfg.system else {
        return Err(BenchError::Config("surrogate needs system.id = \"chain\"".into()));
    };
    let fom = Fom::from_config(cfg)?;
    let training = training(&fom, cfg)?;
    let tests = test_set(&fom, cfg)?;
    let mut results = ExperimentResults::new("surrogate", cfg.hash(), cfg.dt);
    let seed = cfg.seeds.training;

    for &r in &cfg.ranks {
        let p = fit_projections(&fom, cfg, &training, r)?;
        for m in projection_results(&fom, cfg, &p, &tests, r)? {
            results.insert(m);
        }
        if cubic == 0.0 {
            let stationary = stationary_lti_cobras(&fom, cfg, r)?;
            let angle = max_angle(&stationary.phi, &p.bpod.phi)?.max(max_angle(&stationary.psi, &p.bpod.psi)?);
            results.checks.insert(format!("stationary_cobras_vs_bpod_angle_r{r}"), angle);
        }
        let lin = kernel_balance(&KernelSpec::Linear { alpha: 0.0 }, &training.states, &training.gradients, r)?;
        let diff = training
            .trajectories
            .iter()
            .flat_map(|t| &t.states)
            .map(|x| (lin.features(x) - p.cobras.features(x)).norm() / (1.0 + p.cobras.features(x).norm()))
            .fold(0.0, f64::max);
        results.checks.insert(format!("linear_kernel_feature_diff_r{r}"), diff);
    }

    if let Some(l) = &cfg.learned {
        let models = fit_learned(cfg, l, &training)?;
        let sys = fom.system();
        let held_out = simulate(sys, &tests.impulses[0].x0, &tests.impulses[0].inputs, cfg.dt)?;
        results.checks.insert("kcobras_reconstruction_error".into(), reconstruction_error(&models.kcobras, &held_out));
        results.checks.insert("kpca_reconstruction_error".into(), reconstruction_error(&models.kpca, &held_out));
        for (name, meta) in [("kcobras", &models.kcobras.meta), ("kpca", &models.kpca.meta)] {
            results.checks.insert(format!("{name}_dynamics_alpha"), meta.dynamics_cv.alpha);
            results.checks.insert(format!("{name}_dynamics_gamma"), meta.dynamics_cv.gamma);
            results.checks.insert(format!("{name}_reconstruction_alpha"), meta.reconstruction_cv.alpha);
            results.checks.insert(format!("{name}_reconstruction_gamma"), meta.reconstruction_cv.gamma);
        }
        let (test, sine) = evaluate(&tests, |x0, u| models.kcobras.simulate(x0, u, Some(sys)))?;
        let spectrum = Some(models.kcobras.feature_map.spectrum().to_vec());
        results.insert(MethodResult { method: "kcobras-krr".into(), r: l.features, seed, test, sine, spectrum });
        let (test, sine) = evaluate(&tests, |x0, u| models.kpca.simulate(x0, u, Some(sys)))?;
        let spectrum = Some(models.kpca.feature_map.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect());
        results.insert(MethodResult { method: "kpca-krr".into(), r: l.features, seed, test, sine, spectrum });
    }
    Ok(results)
}
