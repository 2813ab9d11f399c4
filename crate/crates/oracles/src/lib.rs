//! Dense reference computations for cross-checking the reduction toolkit.
//!
//! Everything here works on small dense matrices and is deliberately
//! independent of the `cobras` crate: no SVD-based balancing, no adjoint
//! recursions, no snapshot factors. Tests compare the production routes
//! against these.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a_scaled = a * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &a_scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Solves `W = A W Aᵀ + Q` for Schur-stable `A` by Smith doubling.
pub fn discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut w = q.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        let increment = &ak * &w * ak.transpose();
        w += &increment;
        ak = &ak * &ak;
        if increment.norm() <= 1e-16 * w.norm() {
            break;
        }
    }
    w
}

/// Finite-horizon observability sum `Σ_{k=0}^{L} (Aᵀ)^k Cᵀ C A^k`.
pub fn finite_observability_gramian(a: &DMatrix<f64>, c: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut w = DMatrix::zeros(n, n);
    let mut ck = c.clone();
    for _ in 0..=horizon {
        w += ck.transpose() * &ck;
        ck = &ck * a;
    }
    w
}

/// Classical balanced truncation of a discrete-time LTI system.
#[derive(Debug, Clone)]
pub struct BalancedTruncation {
    /// Hankel singular values, nonincreasing.
    pub hankel: Vec<f64>,
    /// Columns span the retained trial subspace (balanced coordinates).
    pub trial: DMatrix<f64>,
    /// Columns span the retained test subspace; `testᵀ trial = I`.
    pub test: DMatrix<f64>,
}

/// Balanced truncation from Lyapunov Gramians, computed through a Cholesky
/// factor of the controllability Gramian and a symmetric eigenproblem.
pub fn balanced_truncation(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: usize,
) -> BalancedTruncation {
    let wc = discrete_lyapunov(a, &(b * b.transpose()));
    let wo = discrete_lyapunov(&a.transpose(), &(c.transpose() * c));
    gramian_balancing(&wc, &wo, r)
}

/// Balancing of two symmetric matrices `wc` (positive definite) and `wo`
/// via `Lᵀ wo L = Q Λ Qᵀ` with `wc = L Lᵀ`.
pub fn gramian_balancing(wc: &DMatrix<f64>, wo: &DMatrix<f64>, r: usize) -> BalancedTruncation {
    let l = wc
        .clone()
        .cholesky()
        .expect("controllability Gramian must be positive definite")
        .l();
    let m = l.transpose() * wo * &l;
    let m = (&m + m.transpose()) * 0.5;
    let (vals, vecs) = sorted_symmetric_eigen(&m);
    let hankel: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let q_r = vecs.columns(0, r).into_owned();
    let scale = DMatrix::from_diagonal(&DVector::from_iterator(r, hankel[..r].iter().map(|s| s.powf(-0.5))));
    let trial = &l * &q_r * &scale;
    let l_inv_t = l
        .transpose()
        .try_inverse()
        .expect("Cholesky factor is invertible");
    let test = l_inv_t * &q_r * DMatrix::from_diagonal(&DVector::from_iterator(r, hankel[..r].iter().map(|s| s.sqrt())));
    BalancedTruncation { hankel, trial, test }
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// nonincreasing order.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (vals, vecs)
}

/// Principal angles (radians, ascending) between the column spaces of `a` and `b`.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    let m = qa.transpose() * qb;
    let svd = m.svd(false, false);
    let mut angles: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|c| c.clamp(-1.0, 1.0).acos())
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// Orthonormal basis of the column space by modified Gram-Schmidt with
/// reorthogonalization.
pub fn orthonormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in 0..a.ncols() {
        let mut v = a.column(j).into_owned();
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dot(&v);
                v -= q * proj;
            }
        }
        let nv = v.norm();
        if nv > 1e-12 * a.column(j).norm().max(f64::MIN_POSITIVE) {
            cols.push(v / nv);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Central difference `[f(x + εw) − f(x − εw)] / 2ε`.
pub fn central_difference<F>(f: F, x: &DVector<f64>, w: &DVector<f64>, eps: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    (f(&(x + w * eps)) - f(&(x - w * eps))) / (2.0 * eps)
}

/// Gradient of a scalar function by central differences along each axis.
pub fn fd_gradient<F>(f: F, x: &DVector<f64>, eps: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x.len();
    DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += eps;
            xm[i] -= eps;
            (f(&xp) - f(&xm)) / (2.0 * eps)
        }),
    )
}

/// Mixed second derivative matrix `H_ij = ∂²k/∂x_i∂y_j` of a two-argument
/// scalar function by a four-point stencil.
pub fn fd_mixed_hessian<F>(k: F, x: &DVector<f64>, y: &DVector<f64>, eps: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += eps;
            xm[i] -= eps;
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += eps;
            ym[j] -= eps;
            h[(i, j)] = (k(&xp, &yp) - k(&xp, &ym) - k(&xm, &yp) + k(&xm, &ym)) / (4.0 * eps * eps);
        }
    }
    h
}

/// Relative error `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}
