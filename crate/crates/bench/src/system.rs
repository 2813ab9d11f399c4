//! The full-order models an experiment can run on, with the pieces every
//! pipeline shares: training data, test sets and Galerkin evaluation.

use cobras::balance::ProjectionBasis;
use cobras::fom::{impulse_state, simulate, toy_system, ConvectiveChain, DiscreteSystem, Rk4System, ToyModel, Trajectory};
use cobras::rng;
use cobras::rom::{build_discrete_galerkin_rom, build_galerkin_rom, ErrorCurves, RomRun};
use cobras::sampling::{build_state_matrix, leading_samples, sample_gradients_long_multi, GradientSampleSpec, SnapshotMatrix};
use nalgebra::DVector;

use crate::config::{ExperimentConfig, SystemConfig};
use crate::error::BenchResult;
use crate::eval::{build_test_set, evaluate, TestSet};

#[derive(Debug, Clone)]
pub enum Fom {
    Toy(Rk4System<ToyModel>),
    Chain(ConvectiveChain),
}

impl Fom {
    pub fn from_config(cfg: &ExperimentConfig) -> BenchResult<Self> {
        Ok(match cfg.system {
            SystemConfig::Toy { substeps } => Fom::Toy(toy_system(cfg.dt, substeps)?),
            SystemConfig::Chain { n, decay, gain, cubic, sensors } => Fom::Chain(ConvectiveChain::new(n, decay, gain, cubic, sensors)?),
        })
    }

    pub fn system(&self) -> &dyn DiscreteSystem {
        match self {
            Fom::Toy(s) => s,
            Fom::Chain(s) => s,
        }
    }

    pub fn impulse_state(&self, u0: f64) -> DVector<f64> {
        match self {
            Fom::Toy(_) => impulse_state(u0),
            Fom::Chain(c) => c.impulse_state(u0),
        }
    }

    /// Linearization about the origin, used by BPOD.
    pub fn linear_model(&self) -> BenchResult<Box<dyn DiscreteSystem>> {
        Ok(match self {
            Fom::Toy(s) => Box::new(Rk4System::new(ToyModel.linearized(), s.dt, s.substeps)?),
            Fom::Chain(c) => Box::new(c.linear_part()),
        })
    }

    /// Petrov-Galerkin ROM run from `z0 = Ψᵀx0`. The toy model is projected
    /// at the ODE level and integrated like the full model.
    pub fn galerkin_runner<'a>(
        &self,
        basis: &'a (impl ProjectionBasis + ?Sized),
    ) -> BenchResult<Box<dyn Fn(&DVector<f64>, &[DVector<f64>]) -> RomRun + Sync + 'a>> {
        Ok(match self {
            Fom::Toy(s) => {
                let rom = build_galerkin_rom(basis, s)?;
                Box::new(move |x0, u| rom.simulate_from_state(x0, u))
            }
            Fom::Chain(c) => {
                let rom = build_discrete_galerkin_rom(basis, c)?;
                Box::new(move |x0, u| rom.simulate_from_state(x0, u))
            }
        })
    }

    pub fn evaluate_projection(
        &self,
        basis: &(impl ProjectionBasis + ?Sized),
        tests: &TestSet,
    ) -> BenchResult<(ErrorCurves, Option<ErrorCurves>)> {
        let run = self.galerkin_runner(basis)?;
        evaluate(tests, |x0, u| run(x0, u))
    }
}

pub fn gradient_spec(cfg: &ExperimentConfig) -> GradientSampleSpec {
    GradientSampleSpec {
        horizon: cfg.horizon,
        samples: cfg.gradient_samples,
        eta: cfg.eta,
        seed: rng::derive_seed(cfg.seeds.training, "gradients"),
    }
}

#[derive(Debug, Clone)]
pub struct Training {
    pub trajectories: Vec<Trajectory>,
    pub states: SnapshotMatrix,
    pub gradients: SnapshotMatrix,
}

/// Unforced impulse responses extended `L` samples past the last state
/// sample, so every initial condition has a full gradient horizon. States
/// are the leading samples of each trajectory; gradients come from the
/// long-trajectory sampler.
pub fn training_trajectories(fom: &Fom, cfg: &ExperimentConfig) -> BenchResult<Vec<Trajectory>> {
    let sys = fom.system();
    let steps = cfg.training.state_samples - 1 + cfg.horizon;
    let zeros = vec![DVector::zeros(sys.input_dim()); steps];
    Ok(cfg
        .training
        .impulses
        .iter()
        .map(|&u0| simulate(sys, &fom.impulse_state(u0), &zeros, cfg.dt))
        .collect::<cobras::Result<Vec<_>>>()?)
}

pub fn training(fom: &Fom, cfg: &ExperimentConfig) -> BenchResult<Training> {
    let trajectories = training_trajectories(fom, cfg)?;
    let states = build_state_matrix(&trajectories, &leading_samples(&trajectories, cfg.training.state_samples), None)?;
    let gradients = sample_gradients_long_multi(fom.system(), &trajectories, &gradient_spec(cfg))?;
    Ok(Training { trajectories, states, gradients })
}

pub fn test_set(fom: &Fom, cfg: &ExperimentConfig) -> BenchResult<TestSet> {
    build_test_set(fom.system(), cfg, |u0| fom.impulse_state(u0))
}
