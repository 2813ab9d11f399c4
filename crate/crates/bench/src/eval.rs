//! Test sets and error evaluation shared by the experiments.

use cobras::fom::{simulate, DiscreteSystem};
use cobras::rng;
use cobras::rom::{normalized_error, ErrorCurves, ErrorKind, RomRun};
use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::BenchResult;

#[derive(Debug, Clone)]
pub struct TestCase {
    pub x0: DVector<f64>,
    pub inputs: Vec<DVector<f64>>,
    /// Full-model outputs, one per time sample.
    pub truth: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct TestSet {
    pub magnitudes: Vec<f64>,
    pub impulses: Vec<TestCase>,
    pub sine: Option<TestCase>,
}

/// Impulse magnitudes drawn uniformly from the configured range, one
/// stream per draw of the test seed.
pub fn test_magnitudes(cfg: &ExperimentConfig) -> Vec<f64> {
    let (lo, hi) = (cfg.test.u0_min, cfg.test.u0_max);
    (0..cfg.test.count)
        .map(|i| {
            let mut r = rng::stream(cfg.seeds.test, i as u64);
            if hi > lo {
                r.random_range(lo..=hi)
            } else {
                lo
            }
        })
        .collect()
}

fn case<S: DiscreteSystem + ?Sized>(fom: &S, x0: DVector<f64>, inputs: Vec<DVector<f64>>, dt: f64) -> BenchResult<TestCase> {
    let truth = simulate(fom, &x0, &inputs, dt)?.outputs(fom);
    Ok(TestCase { x0, inputs, truth })
}

/// Random impulse responses from `impulse(u₀)` plus, when configured, the
/// response to `u(t) = sin(t)` from rest.
pub fn build_test_set<S: DiscreteSystem + ?Sized>(
    fom: &S,
    cfg: &ExperimentConfig,
    impulse: impl Fn(f64) -> DVector<f64> + Sync,
) -> BenchResult<TestSet> {
    let q = fom.input_dim();
    let magnitudes = test_magnitudes(cfg);
    let impulses = magnitudes
        .par_iter()
        .map(|&u0| case(fom, impulse(u0), vec![DVector::zeros(q); cfg.test.steps], cfg.dt))
        .collect::<BenchResult<Vec<_>>>()?;
    let sine = if cfg.test.sine_steps > 0 {
        let inputs = (0..cfg.test.sine_steps).map(|k| DVector::from_element(q, (k as f64 * cfg.dt).sin())).collect();
        Some(case(fom, DVector::zeros(fom.state_dim()), inputs, cfg.dt)?)
    } else {
        None
    };
    Ok(TestSet { magnitudes, impulses, sine })
}

/// Normalized output errors of `run` over the impulse set and the sine case.
pub fn evaluate<F>(set: &TestSet, run: F) -> BenchResult<(ErrorCurves, Option<ErrorCurves>)>
where
    F: Fn(&DVector<f64>, &[DVector<f64>]) -> RomRun + Sync,
{
    let predicted: Vec<_> = set.impulses.par_iter().map(|c| run(&c.x0, &c.inputs).outputs).collect();
    let truth: Vec<_> = set.impulses.iter().map(|c| c.truth.clone()).collect();
    let test = normalized_error(&predicted, &truth, ErrorKind::Output)?;
    let sine = match &set.sine {
        Some(c) => Some(normalized_error(&[run(&c.x0, &c.inputs).outputs], std::slice::from_ref(&c.truth), ErrorKind::Output)?),
        None => None,
    };
    Ok((test, sine))
}
