use nalgebra::DVector;

use super::{DiscreteSystem, OdeSystem};
use crate::error::{Error, Result};
use crate::linalg::check_finite_vec;

/// Fixed-step RK4 discretization of an [`OdeSystem`] over a sampling
/// interval `dt`, with the input held constant across the interval.
///
/// The adjoint is the exact transpose of the linearized RK4 composition
/// (discretize-then-adjoint), so it agrees with finite differences of
/// [`rk4_step`] up to truncation of the difference quotient.
#[derive(Debug, Clone)]
pub struct Rk4System<S> {
    pub ode: S,
    pub dt: f64,
    pub substeps: usize,
}

impl<S: OdeSystem> Rk4System<S> {
    pub fn new(ode: S, dt: f64, substeps: usize) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::invalid("substeps must be at least 1"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("sampling interval must be positive, got {dt}")));
        }
        Ok(Self { ode, dt, substeps })
    }

    fn h(&self) -> f64 {
        self.dt / self.substeps as f64
    }
}

struct Stages {
    x1: DVector<f64>,
    x2: DVector<f64>,
    x3: DVector<f64>,
    x4: DVector<f64>,
}

fn substep<S: OdeSystem>(ode: &S, x: &DVector<f64>, u: &DVector<f64>, h: f64) -> (DVector<f64>, Stages) {
    let k1 = ode.vector_field(x, u);
    let x2 = x + &k1 * (0.5 * h);
    let k2 = ode.vector_field(&x2, u);
    let x3 = x + &k2 * (0.5 * h);
    let k3 = ode.vector_field(&x3, u);
    let x4 = x + &k3 * h;
    let k4 = ode.vector_field(&x4, u);
    let next = x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    (next, Stages { x1: x.clone(), x2, x3, x4 })
}

/// Transpose of the linearized RK4 substep applied to `v`.
fn substep_adjoint<S: OdeSystem>(ode: &S, st: &Stages, u: &DVector<f64>, v: &DVector<f64>, h: f64) -> DVector<f64> {
    // Stage cotangents: x⁺ = x + h/6 (k1 + 2k2 + 2k3 + k4).
    let mut ax = v.clone();
    let ak4 = v * (h / 6.0);
    let mut ak3 = v * (h / 3.0);
    let mut ak2 = v * (h / 3.0);
    let mut ak1 = v * (h / 6.0);

    let w4 = ode.jacobian_transpose_product(&st.x4, u, &ak4);
    ax += &w4;
    ak3 += &w4 * h;

    let w3 = ode.jacobian_transpose_product(&st.x3, u, &ak3);
    ax += &w3;
    ak2 += &w3 * (0.5 * h);

    let w2 = ode.jacobian_transpose_product(&st.x2, u, &ak2);
    ax += &w2;
    ak1 += &w2 * (0.5 * h);

    let w1 = ode.jacobian_transpose_product(&st.x1, u, &ak1);
    ax += &w1;
    ax
}

/// Classical RK4 composition over one sampling interval.
pub fn rk4_step<S: OdeSystem>(sys: &Rk4System<S>, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    let h = sys.h();
    let mut state = x.clone();
    for _ in 0..sys.substeps {
        state = substep(&sys.ode, &state, u, h).0;
        check_finite_vec(&state, "rk4 state")?;
    }
    Ok(state)
}

/// Exact transpose-Jacobian of [`rk4_step`] at `(x, u)` applied to `v`.
pub fn rk4_adjoint_step<S: OdeSystem>(
    sys: &Rk4System<S>,
    x: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> DVector<f64> {
    let h = sys.h();
    let mut stages = Vec::with_capacity(sys.substeps);
    let mut state = x.clone();
    for _ in 0..sys.substeps {
        let (next, st) = substep(&sys.ode, &state, u, h);
        stages.push(st);
        state = next;
    }
    let mut adj = v.clone();
    for st in stages.iter().rev() {
        adj = substep_adjoint(&sys.ode, st, u, &adj, h);
    }
    adj
}

impl<S: OdeSystem> DiscreteSystem for Rk4System<S> {
    fn state_dim(&self) -> usize {
        self.ode.state_dim()
    }
    fn input_dim(&self) -> usize {
        self.ode.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.ode.output_dim()
    }
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        rk4_step(self, x, u)
    }
    fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.ode.output(x, u)
    }
    fn adjoint_step(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        rk4_adjoint_step(self, x, u, v)
    }
    fn adjoint_output(&self, x: &DVector<f64>, u: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        self.ode.adjoint_output(x, u, eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{ContinuousLti, ToyModel};
    use cobras_oracles::{central_difference, expm};
    use nalgebra::DMatrix;
    use rand::Rng;

    fn scalar_decay(rate: f64, substeps: usize) -> Rk4System<ContinuousLti> {
        let lti = ContinuousLti::new(
            DMatrix::from_element(1, 1, -rate),
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        Rk4System::new(lti, 0.5, substeps).unwrap()
    }

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let sys = scalar_decay(0.0, 3);
        let x = DVector::from_vec(vec![1.25]);
        assert_eq!(rk4_step(&sys, &x, &DVector::zeros(1)).unwrap(), x);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let sys = scalar_decay(5.0, 50);
        let x = rk4_step(&sys, &DVector::from_vec(vec![1.0]), &DVector::zeros(1)).unwrap();
        // RK4 applies R(z) = 1 + z + z²/2 + z³/6 + z⁴/24 per substep.
        let z: f64 = -5.0 * 0.01;
        let amplification = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        assert!((x[0] - amplification.powi(50)).abs() < 1e-15);
        // Global truncation error is 50 · z⁵/120 · e^{-2.5} to leading order, about 1.12e-8.
        let predicted = -50.0 * z.powi(5) / 120.0 / (-0.05f64).exp() * (-2.5f64).exp();
        let err = x[0] - (-2.5f64).exp();
        assert!((err - predicted).abs() < 1e-10, "{err} vs {predicted}");
    }

    fn random_stable(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        // Symmetric part bounded above by -0.5 makes the field contractive.
        let sym = (&m + m.transpose()) * 0.5;
        let lam = sym.symmetric_eigenvalues().max();
        m - DMatrix::identity(n, n) * (lam + 0.5)
    }

    #[test]
    fn linear_field_matches_matrix_exponential() {
        let mut rng = crate::rng::stream(11, 0);
        let a = random_stable(3, &mut rng);
        let lti = ContinuousLti::new(a.clone(), DMatrix::zeros(3, 1), DMatrix::zeros(1, 3)).unwrap();
        let sys = Rk4System::new(lti, 0.5, 50).unwrap();
        let x0 = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        let got = rk4_step(&sys, &x0, &DVector::zeros(1)).unwrap();
        let want = expm(&(a * 0.5)) * &x0;
        assert!((got - want).norm() < 1e-7);
    }

    #[test]
    fn halving_substep_gives_fourth_order_gain() {
        let mut rng = crate::rng::stream(12, 0);
        let a = random_stable(3, &mut rng) * 2.0;
        let x0 = DVector::from_vec(vec![0.3, 1.0, -0.7]);
        let exact = expm(&(&a * 0.5)) * &x0;
        let err = |substeps| {
            let lti = ContinuousLti::new(a.clone(), DMatrix::zeros(3, 1), DMatrix::zeros(1, 3)).unwrap();
            let sys = Rk4System::new(lti, 0.5, substeps).unwrap();
            (rk4_step(&sys, &x0, &DVector::zeros(1)).unwrap() - &exact).norm()
        };
        let ratio = err(4) / err(8);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn adjoint_of_linear_field_is_transition_transpose() {
        let mut rng = crate::rng::stream(13, 0);
        let a = random_stable(4, &mut rng);
        let lti = ContinuousLti::new(a, DMatrix::zeros(4, 1), DMatrix::zeros(1, 4)).unwrap();
        let sys = Rk4System::new(lti, 0.5, 7).unwrap();
        let u = DVector::zeros(1);
        // Dense transition matrix from stepping each basis vector.
        let cols: Vec<_> = (0..4)
            .map(|j| rk4_step(&sys, &DVector::from_fn(4, |i, _| f64::from(u8::from(i == j))), &u).unwrap())
            .collect();
        let t = DMatrix::from_columns(&cols);
        let v = DVector::from_vec(vec![0.2, -1.0, 0.4, 2.0]);
        let got = rk4_adjoint_step(&sys, &DVector::zeros(4), &u, &v);
        assert!((got - t.transpose() * v).norm() < 1e-13);
        assert_eq!(rk4_adjoint_step(&sys, &DVector::zeros(4), &u, &DVector::zeros(4)), DVector::zeros(4));
    }

    #[test]
    fn toy_adjoint_matches_finite_differences() {
        let sys = Rk4System::new(ToyModel, 0.5, 50).unwrap();
        let mut rng = crate::rng::stream(14, 0);
        for _ in 0..20 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-0.5..0.5));
            let u = DVector::from_vec(vec![rng.random_range(-1.0..1.0)]);
            let v = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let w = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let adj = w.dot(&rk4_adjoint_step(&sys, &x, &u, &v));
            let fd = v.dot(&central_difference(|z| rk4_step(&sys, z, &u).unwrap(), &x, &w, 1e-6));
            assert!((adj - fd).abs() <= 1e-5 * adj.abs().max(1e-3), "{adj} vs {fd}");
        }
    }

    #[test]
    fn non_finite_state_is_reported() {
        let sys = scalar_decay(-1.0, 1);
        let err = rk4_step(&sys, &DVector::from_vec(vec![f64::MAX]), &DVector::zeros(1));
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }
}
