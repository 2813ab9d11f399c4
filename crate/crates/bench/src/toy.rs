//! The three-state toy-model study: CoBRAS, POD and BPOD Petrov-Galerkin
//! ROMs trained on two impulse responses.

use cobras::balance::{bpod_projection, cobras_balance, pod_basis, BalancedProjection, PodBasis};

use crate::config::{ExperimentConfig, SystemConfig};
use crate::error::{BenchError, BenchResult};
use crate::results::{ExperimentResults, MethodResult};
use crate::system::{test_set, training, Fom, Training};

/// Projections fitted for one reduced dimension.
#[derive(Debug, Clone)]
pub struct Projections {
    pub cobras: BalancedProjection,
    pub pod: PodBasis,
    pub bpod: BalancedProjection,
}

pub fn fit_projections(fom: &Fom, cfg: &ExperimentConfig, training: &Training, r: usize) -> BenchResult<Projections> {
    Ok(Projections {
        cobras: cobras_balance(&training.states, &training.gradients, r)?,
        pod: pod_basis(&training.states, r)?,
        bpod: bpod_projection(&*fom.linear_model()?, cfg.bpod.horizon, r, cfg.bpod.output_rank)?,
    })
}

/// Evaluates the CoBRAS, POD and BPOD Galerkin ROMs at rank `r`.
pub(crate) fn projection_results(
    fom: &Fom,
    cfg: &ExperimentConfig,
    p: &Projections,
    tests: &crate::eval::TestSet,
    r: usize,
) -> BenchResult<Vec<MethodResult>> {
    let seed = cfg.seeds.training;
    let methods: [(&str, &dyn cobras::balance::ProjectionBasis, Vec<f64>); 3] = [
        ("cobras", &p.cobras, p.cobras.spectrum().to_vec()),
        ("pod", &p.pod, p.pod.singular_values.clone()),
        ("bpod", &p.bpod, p.bpod.spectrum().to_vec()),
    ];
    methods
        .into_iter()
        .map(|(name, basis, spectrum)| {
            let (test, sine) = fom.evaluate_projection(basis, tests)?;
            Ok(MethodResult { method: name.into(), r, seed, test, sine, spectrum: Some(spectrum) })
        })
        .collect()
}

/// Trains every method at every configured rank and evaluates the
/// Petrov-Galerkin ROMs on the test set.
pub fn run_toy_experiment(cfg: &ExperimentConfig) -> BenchResult<ExperimentResults> {
    cfg.validate()?;
    if !matches!(cfg.system, SystemConfig::Toy { .. }) {
        return Err(BenchError::Config("reproduce-toy needs system.id = \"toy\"".into()));
    }
    let fom = Fom::from_config(cfg)?;
    let training = training(&fom, cfg)?;
    let tests = test_set(&fom, cfg)?;
    let mut results = ExperimentResults::new("toy", cfg.hash(), cfg.dt);
    for &r in &cfg.ranks {
        let p = fit_projections(&fom, cfg, &training, r)?;
        for m in projection_results(&fom, cfg, &p, &tests, r)? {
            results.insert(m);
        }
    }
    Ok(results)
}
