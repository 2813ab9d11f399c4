//! Reduced-order models and their evaluation.
//!
//! - [`galerkin`]: Petrov-Galerkin reductions `z⁺ = Ψᵀ f(Φz, u)`.
//! - [`krr`]: Gaussian kernel ridge regression with grid-search
//!   cross-validation.
//! - [`learned`]: discrete-time models learned over feature coordinates.
//! - [`metrics`]: normalized square prediction errors.

pub mod galerkin;
pub mod krr;
pub mod learned;
pub mod metrics;

pub use galerkin::{build_discrete_galerkin_rom, build_galerkin_rom, Bases, GalerkinMap, GalerkinOde, GalerkinRom};
pub use krr::{cross_validate_krr, fit_krr, CvConfig, CvResult, KrrModel};
pub use learned::{learn_feature_rom, LearnedRom};
pub use metrics::{normalized_error, ErrorCurves, ErrorKind};

use nalgebra::DVector;

/// Result of running a reduced model: reduced states, reconstructed full
/// states and outputs, one entry per time sample. Samples from the
/// divergence time on are NaN.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RomRun {
    pub reduced: Vec<DVector<f64>>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub diverged_at: Option<usize>,
}

impl RomRun {
    pub fn with_capacity(len: usize) -> Self {
        Self {
            reduced: Vec::with_capacity(len),
            states: Vec::with_capacity(len),
            outputs: Vec::with_capacity(len),
            diverged_at: None,
        }
    }

    fn diverge(&mut self, k: usize, r: usize, n: usize, m: usize) {
        self.diverged_at.get_or_insert(k);
        self.reduced.push(DVector::from_element(r, f64::NAN));
        self.states.push(DVector::from_element(n, f64::NAN));
        if m > 0 {
            self.outputs.push(DVector::from_element(m, f64::NAN));
        }
    }
}
