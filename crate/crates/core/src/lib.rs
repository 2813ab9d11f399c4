//! Covariance balancing reduction using adjoint snapshots.
//!
//! The crate finds reduced coordinates for nonlinear dynamical systems by
//! balancing the empirical covariance of sampled states against the
//! covariance of adjoint-sampled output gradients. The linear variant yields
//! an oblique projection for Petrov-Galerkin models; the kernel variant
//! yields nonlinear features in which dynamics can be learned by regression.
//!
//! Modules, roughly bottom-up:
//!
//! - [`fom`]: discrete-time full-order model interface, RK4 discretization
//!   with exact discrete adjoints, shipped test systems.
//! - [`sampling`]: state and gradient covariance factors, random output
//!   directions, adjoint recursions, stationary and long-trajectory sampling.
//! - [`balance`]: the balancing SVD, linear features, POD and BPOD baselines,
//!   and a dense generalized-eigenproblem reference.
//! - [`kernel`]: smooth kernels with closed-form derivatives, kernel
//!   balancing, nonlinear features and their derivatives, kernel PCA.
//! - [`rom`]: Petrov-Galerkin and regression-learned reduced models, kernel
//!   ridge regression with cross-validation, error metrics.

pub mod balance;
pub mod error;
pub mod features;
pub mod fom;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod rng;
pub mod rom;
pub mod sampling;

pub use error::{Error, Result};
pub use features::{FeatureMap, LinearCoordinates};
