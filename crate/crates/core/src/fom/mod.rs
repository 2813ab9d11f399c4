//! Full-order model interface.
//!
//! A [`DiscreteSystem`] is the map `x(t+1) = f(x(t), u(t))`, `y(t) = g(x(t), u(t))`
//! together with the transpose-Jacobian products needed by the adjoint
//! recursion. Continuous-time models implement [`OdeSystem`] and become
//! discrete systems through [`Rk4System`].

mod rk4;
mod systems;
mod trajectory;

pub use rk4::{rk4_adjoint_step, rk4_step, Rk4System};
pub use systems::{
    impulse_state, toy_output, toy_system, toy_vector_field, ContinuousLti, ConvectiveChain, DiscreteLti, ToyModel,
};
pub use trajectory::{simulate, Trajectory};

use nalgebra::DVector;

use crate::error::Result;

/// Discrete-time full-order model with exact adjoint products.
pub trait DiscreteSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// `f(x, u)`; errors when the result is not finite.
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// `g(x, u)`.
    fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// `D_x f(x, u)ᵀ v`.
    fn adjoint_step(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    /// `D_x g(x, u)ᵀ η`.
    fn adjoint_output(&self, x: &DVector<f64>, u: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64>;
}

/// Continuous-time model `ẋ = F(x, u)`, `y = g(x, u)`.
pub trait OdeSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// `D_x F(x, u)ᵀ v`.
    fn jacobian_transpose_product(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;

    fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// `D_x g(x, u)ᵀ η`.
    fn adjoint_output(&self, x: &DVector<f64>, u: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64>;
}

impl<S: DiscreteSystem + ?Sized> DiscreteSystem for &S {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).step(x, u)
    }
    fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        (**self).output(x, u)
    }
    fn adjoint_step(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        (**self).adjoint_step(x, u, v)
    }
    fn adjoint_output(&self, x: &DVector<f64>, u: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        (**self).adjoint_output(x, u, eta)
    }
}
