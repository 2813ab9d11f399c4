use nalgebra::{DMatrix, DVector};

use crate::balance::ProjectionBasis;
use crate::error::{Error, Result};
use crate::fom::{DiscreteSystem, OdeSystem, Rk4System};

use super::RomRun;

/// Norm beyond which a reduced trajectory counts as diverged.
pub const BLOW_UP_NORM: f64 = 1e6;

/// Trial basis `Φ` and test basis `Ψ` with `ΨᵀΦ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bases {
    pub phi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
}

impl Bases {
    /// Rescales `Ψ` to `Ψ (ΨᵀΦ)^{-T}` when the pair is not already
    /// biorthogonal.
    pub fn new(phi: DMatrix<f64>, psi: DMatrix<f64>) -> Result<Self> {
        if phi.shape() != psi.shape() {
            return Err(Error::DimensionMismatch { context: "trial/test basis columns", expected: phi.ncols(), found: psi.ncols() });
        }
        let r = phi.ncols();
        let m = psi.tr_mul(&phi);
        let eye = DMatrix::<f64>::identity(r, r);
        if (&m - &eye).norm() <= 1e-10 {
            return Ok(Self { phi, psi });
        }
        let svals = m.clone().svd(false, false).singular_values;
        if svals.min() <= 1e-12 * svals.max().max(f64::MIN_POSITIVE) {
            return Err(Error::Singular("test-trial product ΨᵀΦ"));
        }
        let m_inv = m.try_inverse().ok_or(Error::Singular("test-trial product ΨᵀΦ"))?;
        Ok(Self { phi, psi: psi * m_inv.transpose() })
    }

    pub fn from_projection(basis: &(impl ProjectionBasis + ?Sized)) -> Result<Self> {
        Self::new(basis.trial().clone(), basis.test().clone())
    }

    pub fn rank(&self) -> usize {
        self.phi.ncols()
    }

    pub fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.phi * z
    }

    pub fn encode(&self, x: &DVector<f64>) -> DVector<f64> {
        self.psi.tr_mul(x)
    }
}

/// Petrov-Galerkin reduction of a vector field: `ż = Ψᵀ F(Φz, u)`,
/// `y = g(Φz, u)`.
#[derive(Debug, Clone)]
pub struct GalerkinOde<S> {
    pub base: S,
    pub bases: Bases,
}

impl<S: OdeSystem> OdeSystem for GalerkinOde<S> {
    fn state_dim(&self) -> usize {
        self.bases.rank()
    }
    fn input_dim(&self) -> usize {
        self.base.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.base.output_dim()
    }
    fn vector_field(&self, z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.bases.encode(&self.base.vector_field(&self.bases.lift(z), u))
    }
    fn jacobian_transpose_product(&self, z: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let w = self.base.jacobian_transpose_product(&self.bases.lift(z), u, &(&self.bases.psi * v));
        self.bases.phi.tr_mul(&w)
    }
    fn output(&self, z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.base.output(&self.bases.lift(z), u)
    }
    fn adjoint_output(&self, z: &DVector<f64>, u: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        self.bases.phi.tr_mul(&self.base.adjoint_output(&self.bases.lift(z), u, eta))
    }
}

/// Petrov-Galerkin reduction of a discrete map: `z⁺ = Ψᵀ f(Φz, u)`.
#[derive(Debug, Clone)]
pub struct GalerkinMap<S> {
    pub base: S,
    pub bases: Bases,
}

impl<S: DiscreteSystem> DiscreteSystem for GalerkinMap<S> {
    fn state_dim(&self) -> usize {
        self.bases.rank()
    }
    fn input_dim(&self) -> usize {
        self.base.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.base.output_dim()
    }
    fn step(&self, z: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.bases.encode(&self.base.step(&self.bases.lift(z), u)?))
    }
    fn output(&self, z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.base.output(&self.bases.lift(z), u)
    }
    fn adjoint_step(&self, z: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let w = self.base.adjoint_step(&self.bases.lift(z), u, &(&self.bases.psi * v));
        self.bases.phi.tr_mul(&w)
    }
    fn adjoint_output(&self, z: &DVector<f64>, u: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        self.bases.phi.tr_mul(&self.base.adjoint_output(&self.bases.lift(z), u, eta))
    }
}

/// A reduced system together with the bases that connect it to full states.
#[derive(Debug, Clone)]
pub struct GalerkinRom<R> {
    pub system: R,
    pub bases: Bases,
}

/// Petrov-Galerkin ROM of an RK4-discretized model, integrated with the
/// same interval and substeps as the full model.
pub fn build_galerkin_rom<S: OdeSystem + Clone>(
    basis: &(impl ProjectionBasis + ?Sized),
    fom: &Rk4System<S>,
) -> Result<GalerkinRom<Rk4System<GalerkinOde<S>>>> {
    let bases = Bases::from_projection(basis)?;
    check_state_dim(&bases, fom.ode.state_dim())?;
    let ode = GalerkinOde { base: fom.ode.clone(), bases: bases.clone() };
    Ok(GalerkinRom { system: Rk4System::new(ode, fom.dt, fom.substeps)?, bases })
}

/// Petrov-Galerkin ROM of a discrete map.
pub fn build_discrete_galerkin_rom<S: DiscreteSystem + Clone>(
    basis: &(impl ProjectionBasis + ?Sized),
    fom: &S,
) -> Result<GalerkinRom<GalerkinMap<S>>> {
    let bases = Bases::from_projection(basis)?;
    check_state_dim(&bases, fom.state_dim())?;
    Ok(GalerkinRom { system: GalerkinMap { base: fom.clone(), bases: bases.clone() }, bases })
}

fn check_state_dim(bases: &Bases, n: usize) -> Result<()> {
    if bases.phi.nrows() != n {
        return Err(Error::DimensionMismatch { context: "basis rows vs full state", expected: n, found: bases.phi.nrows() });
    }
    Ok(())
}

impl<R: DiscreteSystem> GalerkinRom<R> {
    /// Runs from `z0 = Ψᵀx0`.
    pub fn simulate_from_state(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> RomRun {
        self.simulate(&self.bases.encode(x0), inputs)
    }

    /// Runs the reduced system for `inputs.len()` steps. Divergence is
    /// recorded in the result and every later sample is NaN.
    pub fn simulate(&self, z0: &DVector<f64>, inputs: &[DVector<f64>]) -> RomRun {
        let q = self.system.input_dim();
        let steps = inputs.len();
        let mut run = RomRun::with_capacity(steps + 1);
        let mut z = Some(z0.clone());
        for k in 0..=steps {
            let u = inputs.get(k).cloned().unwrap_or_else(|| DVector::zeros(q));
            let x = z.as_ref().map(|zk| self.bases.lift(zk));
            let (Some(zk), Some(x)) = (z.take(), x) else {
                run.diverge(k, self.bases.rank(), self.bases.phi.nrows(), self.system.output_dim());
                continue;
            };
            if !x.iter().all(|v| v.is_finite()) || x.norm() > BLOW_UP_NORM {
                run.diverge(k, self.bases.rank(), self.bases.phi.nrows(), self.system.output_dim());
                continue;
            }
            run.outputs.push(self.system.output(&zk, &u));
            run.states.push(x);
            if k < steps {
                z = self.system.step(&zk, &u).ok();
            }
            run.reduced.push(zk);
        }
        run
    }
}
