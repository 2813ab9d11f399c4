//! Covariance balancing and linear baselines.
//!
//! Given factors `W_x = XXᵀ` and `W_g = YYᵀ`, the balancing SVD
//! `YᵀX = U Σ Vᵀ` gives
//!
//! ```text
//! Φ = X V_r Σ_r^{-1/2},   Ψ = Y U_r Σ_r^{-1/2},   P = ΦΨᵀ
//! ```
//!
//! an oblique projection minimizing `Tr[W_x (I − P)ᵀ W_g (I − P)]` over
//! rank-`r` projections, with minimum `σ_{r+1}² + σ_{r+2}² + …`. Only the
//! `s_g × s_x` product is decomposed; no `n × n` matrix is formed.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::fom::DiscreteSystem;
use crate::io::{read_json, read_matrix_csv, read_values_csv, write_json, write_matrix_csv, write_values_csv};
use crate::linalg::{numerical_rank, svd_sorted, symmetric_eigen_sorted};
use crate::rng;
use crate::sampling::SnapshotMatrix;

/// Singular values below `RANK_TOL · σ₁` are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

pub const SIGN_CONVENTION: &str = "max-abs-entry-of-left-singular-vector-positive";

/// Trial and test bases of a projection-based reduction.
pub trait ProjectionBasis {
    /// `Φ`, `n × r`.
    fn trial(&self) -> &DMatrix<f64>;
    /// `Ψ`, `n × r`.
    fn test(&self) -> &DMatrix<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceMeta {
    pub r: usize,
    pub requested_r: usize,
    pub sources: Vec<String>,
    pub rank_tolerance: f64,
    pub sign_convention: String,
    /// Every singular value of `YᵀX`.
    pub spectrum: Vec<f64>,
}

/// The oblique projection `P = ΦΨᵀ` with `ΨᵀΦ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedProjection {
    pub phi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    /// Leading `r` singular values of `YᵀX`.
    pub sigma: Vec<f64>,
    pub meta: BalanceMeta,
}

impl BalancedProjection {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn state_dim(&self) -> usize {
        self.phi.nrows()
    }

    /// Full singular spectrum of `YᵀX`.
    pub fn spectrum(&self) -> &[f64] {
        &self.meta.spectrum
    }

    /// `Px = Φ(Ψᵀx)`.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.phi * self.psi.tr_mul(x)
    }

    /// Dense `n × n` projector; for checks on small problems.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.phi * self.psi.transpose()
    }

    /// Writes `phi.csv`, `psi.csv`, `sigma.csv` and `meta.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_matrix_csv(&self.phi, dir.join("phi.csv"))?;
        write_matrix_csv(&self.psi, dir.join("psi.csv"))?;
        write_values_csv(&self.sigma, dir.join("sigma.csv"))?;
        write_json(&self.meta, dir.join("meta.json"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let phi = read_matrix_csv(dir.join("phi.csv"))?;
        let psi = read_matrix_csv(dir.join("psi.csv"))?;
        let sigma = read_values_csv(dir.join("sigma.csv"))?;
        let meta: BalanceMeta = read_json(dir.join("meta.json"))?;
        if phi.shape() != psi.shape() || phi.ncols() != sigma.len() {
            return Err(Error::DimensionMismatch { context: "stored projection", expected: phi.ncols(), found: sigma.len() });
        }
        Ok(Self { phi, psi, sigma, meta })
    }
}

impl ProjectionBasis for BalancedProjection {
    fn trial(&self) -> &DMatrix<f64> {
        &self.phi
    }
    fn test(&self) -> &DMatrix<f64> {
        &self.psi
    }
}

impl FeatureMap for BalancedProjection {
    fn state_dim(&self) -> usize {
        self.phi.nrows()
    }
    fn feature_dim(&self) -> usize {
        self.phi.ncols()
    }
    fn features(&self, x: &DVector<f64>) -> DVector<f64> {
        linear_features(self, x)
    }
}

/// Balancing projection from snapshot matrices.
pub fn cobras_balance(x: &SnapshotMatrix, y: &SnapshotMatrix, r: usize) -> Result<BalancedProjection> {
    let mut proj = cobras_balance_factors(x.data(), y.data(), r)?;
    proj.meta.sources = x.meta().sources.iter().chain(&y.meta().sources).cloned().collect();
    Ok(proj)
}

/// Balancing projection from raw factors `X` (`n × s_x`) and `Y`
/// (`n × s_g`). A request beyond the numerical rank of `YᵀX` is truncated
/// with a warning.
pub fn cobras_balance_factors(x: &DMatrix<f64>, y: &DMatrix<f64>, r: usize) -> Result<BalancedProjection> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch { context: "factor state dimension", expected: x.nrows(), found: y.nrows() });
    }
    if r == 0 {
        return Err(Error::invalid("reduced dimension must be at least 1"));
    }
    let max = x.ncols().min(y.ncols());
    if r > max {
        return Err(Error::RankTooLarge { requested: r, max });
    }
    let svd = svd_sorted(&y.tr_mul(x))?;
    if svd.sigma.first().is_none_or(|&s| s <= 0.0) {
        return Err(Error::ZeroData);
    }
    let rho = numerical_rank(&svd.sigma, RANK_TOL);
    let rank = r.min(rho);
    if rank < r {
        log::warn!("requested rank {r} exceeds numerical rank {rho} of the balancing matrix; truncating");
    }
    let scale = DVector::from_iterator(rank, svd.sigma[..rank].iter().map(|s| s.powf(-0.5)));
    let phi = x * svd.v.columns(0, rank) * DMatrix::from_diagonal(&scale);
    let psi = y * svd.u.columns(0, rank) * DMatrix::from_diagonal(&scale);
    Ok(BalancedProjection {
        phi,
        psi,
        sigma: svd.sigma[..rank].to_vec(),
        meta: BalanceMeta {
            r: rank,
            requested_r: r,
            sources: Vec::new(),
            rank_tolerance: RANK_TOL,
            sign_convention: SIGN_CONVENTION.to_string(),
            spectrum: svd.sigma,
        },
    })
}

/// Linear features `z = Ψᵀx`.
pub fn linear_features(proj: &BalancedProjection, x: &DVector<f64>) -> DVector<f64> {
    proj.psi.tr_mul(x)
}

/// `Tr[W_x (I − P)ᵀ W_g (I − P)] = ‖YᵀX − (YᵀΦ)(ΨᵀX)‖_F²` for `P = ΦΨᵀ`,
/// evaluated from the factors.
pub fn truncation_cost(x: &DMatrix<f64>, y: &DMatrix<f64>, phi: &DMatrix<f64>, psi: &DMatrix<f64>) -> f64 {
    let full = y.tr_mul(x);
    let reduced = y.tr_mul(phi) * psi.tr_mul(x);
    (full - reduced).norm_squared()
}

/// Orthonormal POD modes with their singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub modes: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl ProjectionBasis for PodBasis {
    fn trial(&self) -> &DMatrix<f64> {
        &self.modes
    }
    fn test(&self) -> &DMatrix<f64> {
        &self.modes
    }
}

impl FeatureMap for PodBasis {
    fn state_dim(&self) -> usize {
        self.modes.nrows()
    }
    fn feature_dim(&self) -> usize {
        self.modes.ncols()
    }
    fn features(&self, x: &DVector<f64>) -> DVector<f64> {
        self.modes.tr_mul(x)
    }
}

pub fn pod_basis(x: &SnapshotMatrix, r: usize) -> Result<PodBasis> {
    pod_basis_factor(x.data(), r)
}

/// Leading `r` left singular vectors of `X`.
pub fn pod_basis_factor(x: &DMatrix<f64>, r: usize) -> Result<PodBasis> {
    if r == 0 {
        return Err(Error::invalid("reduced dimension must be at least 1"));
    }
    let svd = svd_sorted(x)?;
    let rank = numerical_rank(&svd.sigma, RANK_TOL);
    if r > rank {
        return Err(Error::RankTooLarge { requested: r, max: rank });
    }
    Ok(PodBasis { modes: svd.u.columns(0, r).into_owned(), singular_values: svd.sigma[..r].to_vec() })
}

fn check_linear<S: DiscreteSystem + ?Sized>(sys: &S) -> Result<()> {
    let (n, q, m) = (sys.state_dim(), sys.input_dim(), sys.output_dim());
    let mut rng = rng::stream(0x5eed, 0);
    let mut rand_vec = |len: usize| DVector::from_fn(len, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
    let (x1, x2, u1, u2) = (rand_vec(n), rand_vec(n), rand_vec(q), rand_vec(q));
    let eta = rand_vec(m);
    let v = rand_vec(n);
    let (a, b) = (0.7, -1.3);
    let lhs = sys.step(&(&x1 * a + &x2 * b), &(&u1 * a + &u2 * b))?;
    let rhs = sys.step(&x1, &u1)? * a + sys.step(&x2, &u2)? * b;
    let out_lhs = sys.output(&(&x1 * a + &x2 * b), &(&u1 * a + &u2 * b));
    let out_rhs = sys.output(&x1, &u1) * a + sys.output(&x2, &u2) * b;
    // Linear systems have state-independent adjoints.
    let adj = (sys.adjoint_step(&x1, &u1, &v) - sys.adjoint_step(&x2, &u2, &v)).norm()
        + (sys.adjoint_output(&x1, &u1, &eta) - sys.adjoint_output(&x2, &u2, &eta)).norm();
    let scale = 1.0 + rhs.norm() + out_rhs.norm() + sys.adjoint_step(&x1, &u1, &v).norm();
    let residual = ((lhs - rhs).norm() + (out_lhs - out_rhs).norm() + adj) / scale;
    if residual > 1e-10 {
        return Err(Error::Nonlinear { residual });
    }
    Ok(())
}

/// Balanced POD of a linear system from direct and adjoint impulse
/// responses over `horizon` steps.
///
/// Direct snapshots are `B, AB, …, A^{horizon−1}B`. The adjoint system is
/// driven through an output projection onto the leading
/// `output_projection_rank` POD modes of the direct outputs (the full
/// output space when that rank is at least the output dimension), giving
/// snapshots `CᵀΘ, AᵀCᵀΘ, …`.
pub fn bpod_projection<S: DiscreteSystem + ?Sized>(
    sys: &S,
    horizon: usize,
    r: usize,
    output_projection_rank: usize,
) -> Result<BalancedProjection> {
    let (x, y) = bpod_snapshots(sys, horizon, output_projection_rank)?;
    let mut proj = cobras_balance_factors(&x, &y, r)?;
    proj.meta.sources = vec!["direct-impulse".into(), "adjoint-impulse".into()];
    Ok(proj)
}

/// Direct and adjoint impulse-response snapshot matrices used by
/// [`bpod_projection`].
pub fn bpod_snapshots<S: DiscreteSystem + ?Sized>(
    sys: &S,
    horizon: usize,
    output_projection_rank: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if horizon == 0 {
        return Err(Error::invalid("BPOD horizon must be at least 1"));
    }
    if output_projection_rank == 0 {
        return Err(Error::invalid("output projection rank must be at least 1"));
    }
    check_linear(sys)?;
    let (n, q, m) = (sys.state_dim(), sys.input_dim(), sys.output_dim());
    let zero_x = DVector::zeros(n);
    let zero_u = DVector::zeros(q);

    let mut direct = Vec::with_capacity(q * horizon);
    for j in 0..q {
        let mut x = sys.step(&zero_x, &DVector::from_fn(q, |i, _| if i == j { 1.0 } else { 0.0 }))?;
        for k in 0..horizon {
            if k > 0 {
                x = sys.step(&x, &zero_u)?;
            }
            direct.push(x.clone());
        }
    }
    let x_mat = DMatrix::from_columns(&direct);

    let theta = if output_projection_rank >= m {
        DMatrix::identity(m, m)
    } else {
        let outputs: Vec<_> = direct.iter().map(|x| sys.output(x, &zero_u)).collect();
        let svd = svd_sorted(&DMatrix::from_columns(&outputs))?;
        let keep = output_projection_rank.min(numerical_rank(&svd.sigma, RANK_TOL)).max(1);
        svd.u.columns(0, keep).into_owned()
    };

    let mut adjoint = Vec::with_capacity(theta.ncols() * horizon);
    for j in 0..theta.ncols() {
        let mut w = sys.adjoint_output(&zero_x, &zero_u, &theta.column(j).into_owned());
        for k in 0..horizon {
            if k > 0 {
                w = sys.adjoint_step(&zero_x, &zero_u, &w);
            }
            adjoint.push(w.clone());
        }
    }
    Ok((x_mat, DMatrix::from_columns(&adjoint)))
}

/// Dense reference projector from the generalized eigenproblem
/// `W_g V = W_x⁻¹ V Λ`: `P = V_r V_rᵀ W_x⁻¹` with `V_rᵀ W_x⁻¹ V_r = I`.
///
/// Computed as `P = L Q_r Q_rᵀ L⁻¹` from `W_x = LLᵀ` and the symmetric
/// eigenproblem `Lᵀ W_g L = QΛQᵀ`. Intended for small checks only.
pub fn zahm_oracle(wx: &DMatrix<f64>, wg: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let n = wx.nrows();
    if wx.shape() != (n, n) || wg.shape() != (n, n) {
        return Err(Error::DimensionMismatch { context: "covariance shape", expected: n, found: wg.nrows() });
    }
    if r == 0 || r > n {
        return Err(Error::RankTooLarge { requested: r, max: n });
    }
    let chol = wx.clone().cholesky().ok_or(Error::NotPositiveDefinite("state covariance"))?;
    let l = chol.l();
    let (_, q) = symmetric_eigen_sorted(&(l.transpose() * wg * &l))?;
    let q_r = q.columns(0, r);
    let l_inv = l.clone().try_inverse().ok_or(Error::Singular("Cholesky factor"))?;
    Ok(&l * q_r * q_r.transpose() * l_inv)
}
