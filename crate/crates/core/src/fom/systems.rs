//! Shipped test systems.

use nalgebra::{DMatrix, DVector};

use super::{DiscreteSystem, OdeSystem, Rk4System};
use crate::error::{Error, Result};
use crate::linalg::check_finite_vec;

/// Vector field of the three-state model with a fast, low-variance state
/// `x₃` that multiplies the slow states:
/// `(−x₁ + 20x₁x₃ + u, −2x₂ + 20x₂x₃ + u, −5x₃ + u)`.
pub fn toy_vector_field(x: &DVector<f64>, u: f64) -> DVector<f64> {
    DVector::from_vec(vec![
        -x[0] + 20.0 * x[0] * x[2] + u,
        -2.0 * x[1] + 20.0 * x[1] * x[2] + u,
        -5.0 * x[2] + u,
    ])
}

/// `y = x₁ + x₂ + x₃`.
pub fn toy_output(x: &DVector<f64>) -> f64 {
    x[0] + x[1] + x[2]
}

/// Initial state `(u₀, u₀, u₀)` of an impulse response with magnitude `u₀`.
pub fn impulse_state(u0: f64) -> DVector<f64> {
    DVector::from_element(3, u0)
}

/// The three-state toy model as an ODE with one input and one output.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToyModel;

impl ToyModel {
    /// Linearization about the origin.
    pub fn linearized(&self) -> ContinuousLti {
        ContinuousLti {
            a: DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, -5.0])),
            b: DMatrix::from_element(3, 1, 1.0),
            c: DMatrix::from_element(1, 3, 1.0),
        }
    }
}

impl OdeSystem for ToyModel {
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        toy_vector_field(x, u[0])
    }
    fn jacobian_transpose_product(&self, x: &DVector<f64>, _u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![
            (-1.0 + 20.0 * x[2]) * v[0],
            (-2.0 + 20.0 * x[2]) * v[1],
            20.0 * x[0] * v[0] + 20.0 * x[1] * v[1] - 5.0 * v[2],
        ])
    }
    fn output(&self, x: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, toy_output(x))
    }
    fn adjoint_output(&self, _x: &DVector<f64>, _u: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(3, eta[0])
    }
}

/// Toy model sampled every `dt` with `substeps` internal RK4 steps.
pub fn toy_system(dt: f64, substeps: usize) -> Result<Rk4System<ToyModel>> {
    Rk4System::new(ToyModel, dt, substeps)
}

/// Continuous-time LTI system `ẋ = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone)]
pub struct ContinuousLti {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl ContinuousLti {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        check_lti_shapes(&a, &b, &c)?;
        Ok(Self { a, b, c })
    }
}

impl OdeSystem for ContinuousLti {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    fn output_dim(&self) -> usize {
        self.c.nrows()
    }
    fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
    fn jacobian_transpose_product(&self, _x: &DVector<f64>, _u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(v)
    }
    fn output(&self, x: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }
    fn adjoint_output(&self, _x: &DVector<f64>, _u: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        self.c.tr_mul(eta)
    }
}

/// Discrete-time LTI system `x(t+1) = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone)]
pub struct DiscreteLti {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl DiscreteLti {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        check_lti_shapes(&a, &b, &c)?;
        Ok(Self { a, b, c })
    }
}

impl DiscreteSystem for DiscreteLti {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    fn output_dim(&self) -> usize {
        self.c.nrows()
    }
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let next = &self.a * x + &self.b * u;
        check_finite_vec(&next, "lti state")?;
        Ok(next)
    }
    fn output(&self, x: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }
    fn adjoint_step(&self, _x: &DVector<f64>, _u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(v)
    }
    fn adjoint_output(&self, _x: &DVector<f64>, _u: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        self.c.tr_mul(eta)
    }
}

fn check_lti_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { context: "A columns", expected: n, found: a.ncols() });
    }
    if b.nrows() != n {
        return Err(Error::DimensionMismatch { context: "B rows", expected: n, found: b.nrows() });
    }
    if c.ncols() != n {
        return Err(Error::DimensionMismatch { context: "C columns", expected: n, found: c.ncols() });
    }
    Ok(())
}

/// A one-dimensional convective chain: disturbances injected at the first
/// cell are carried downstream while growing transiently, then leave the
/// domain. The linear part `A = λI + γS` (S the down-shift) is stable but
/// strongly non-normal, so low-energy upstream states drive large
/// downstream responses. An optional cubic damping `−β xᵢ³` makes the map
/// mildly nonlinear.
///
/// Input enters cell 0; the output is the sum of the last `sensors` cells.
#[derive(Debug, Clone)]
pub struct ConvectiveChain {
    pub n: usize,
    pub decay: f64,
    pub gain: f64,
    pub cubic: f64,
    pub sensors: usize,
}

impl ConvectiveChain {
    pub fn new(n: usize, decay: f64, gain: f64, cubic: f64, sensors: usize) -> Result<Self> {
        if n < 2 || sensors == 0 || sensors > n {
            return Err(Error::invalid(format!("invalid chain: n={n}, sensors={sensors}")));
        }
        if decay.abs() >= 1.0 {
            return Err(Error::invalid("chain decay must satisfy |λ| < 1 for stability"));
        }
        Ok(Self { n, decay, gain, cubic, sensors })
    }

    /// Linear part as a [`DiscreteLti`].
    pub fn linear_part(&self) -> DiscreteLti {
        let n = self.n;
        let mut a = DMatrix::identity(n, n) * self.decay;
        for i in 1..n {
            a[(i, i - 1)] = self.gain;
        }
        let mut b = DMatrix::zeros(n, 1);
        b[(0, 0)] = 1.0;
        let mut c = DMatrix::zeros(1, n);
        for j in n - self.sensors..n {
            c[(0, j)] = 1.0;
        }
        DiscreteLti { a, b, c }
    }

    /// Initial state of an impulse with magnitude `u0` at the inflow cell.
    pub fn impulse_state(&self, u0: f64) -> DVector<f64> {
        let mut x = DVector::zeros(self.n);
        x[0] = u0;
        x
    }
}

impl DiscreteSystem for ConvectiveChain {
    fn state_dim(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let mut next = x * self.decay;
        for i in 1..self.n {
            next[i] += self.gain * x[i - 1];
        }
        next[0] += u[0];
        if self.cubic != 0.0 {
            for i in 0..self.n {
                next[i] -= self.cubic * x[i].powi(3);
            }
        }
        check_finite_vec(&next, "chain state")?;
        Ok(next)
    }
    fn output(&self, x: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x.rows(self.n - self.sensors, self.sensors).sum())
    }
    fn adjoint_step(&self, x: &DVector<f64>, _u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v * self.decay;
        for i in 0..self.n - 1 {
            out[i] += self.gain * v[i + 1];
        }
        if self.cubic != 0.0 {
            for i in 0..self.n {
                out[i] -= 3.0 * self.cubic * x[i] * x[i] * v[i];
            }
        }
        out
    }
    fn adjoint_output(&self, _x: &DVector<f64>, _u: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for j in self.n - self.sensors..self.n {
            out[j] = eta[0];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cobras_oracles::central_difference;
    use rand::Rng;

    #[test]
    fn toy_field_examples() {
        assert_eq!(toy_vector_field(&DVector::zeros(3), 0.0), DVector::zeros(3));
        let ones = DVector::from_element(3, 1.0);
        assert_eq!(toy_vector_field(&ones, 0.0), DVector::from_vec(vec![19.0, 18.0, -5.0]));
        assert_eq!(toy_output(&ones), 3.0);
        assert_eq!(impulse_state(0.5), DVector::from_element(3, 0.5));
    }

    #[test]
    fn toy_jacobian_transpose_matches_finite_differences() {
        let mut rng = crate::rng::stream(21, 0);
        let u = DVector::from_element(1, 0.3);
        for _ in 0..10 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let v = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let w = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let fd = central_difference(|z| ToyModel.vector_field(z, &u), &x, &w, 1e-6);
            let lhs = w.dot(&ToyModel.jacobian_transpose_product(&x, &u, &v));
            assert!((lhs - v.dot(&fd)).abs() < 1e-7 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn chain_adjoint_consistency_and_linear_part() {
        let chain = ConvectiveChain::new(12, 0.5, 0.55, 0.1, 3).unwrap();
        let lin = chain.linear_part();
        let mut rng = crate::rng::stream(22, 0);
        let u = DVector::from_element(1, 0.2);
        for _ in 0..10 {
            let x = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
            let v = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
            let w = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
            let fd = central_difference(|z| chain.step(z, &u).unwrap(), &x, &w, 1e-6);
            let lhs = w.dot(&chain.adjoint_step(&x, &u, &v));
            assert!((lhs - v.dot(&fd)).abs() < 1e-7 * lhs.abs().max(1.0));
        }
        let linear = ConvectiveChain { cubic: 0.0, ..chain.clone() };
        let x = DVector::from_fn(12, |i, _| i as f64 * 0.1);
        assert!((linear.step(&x, &u).unwrap() - lin.step(&x, &u).unwrap()).norm() < 1e-14);
        assert_eq!(linear.output(&x, &u), lin.output(&x, &u));
    }
}
