//! Sorted, sign-normalized factorizations.
//!
//! nalgebra returns singular values and symmetric eigenvalues unordered and
//! with arbitrary signs; everything downstream wants nonincreasing order and
//! a reproducible sign per column.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Thin SVD `m = U diag(σ) Vᵀ` with `σ` nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// Thin SVD with σ sorted descending. Each column of `U` is flipped so its
/// largest-magnitude entry is positive, with `V` flipped to match.
pub fn svd_sorted(m: &DMatrix<f64>) -> Result<Svd> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.ok_or(Error::Singular("svd did not converge"))?;
    let v_t = svd.v_t.ok_or(Error::Singular("svd did not converge"))?;
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut u_sorted = DMatrix::zeros(u.nrows(), k);
    let mut v_sorted = DMatrix::zeros(v_t.ncols(), k);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut uc = u.column(src).into_owned();
        let mut vc = v_t.row(src).transpose();
        if leading_sign(&uc) < 0.0 {
            uc.neg_mut();
            vc.neg_mut();
        }
        u_sorted.set_column(dst, &uc);
        v_sorted.set_column(dst, &vc);
        sigma.push(svd.singular_values[src]);
    }
    Ok(Svd { u: u_sorted, sigma, v: v_sorted })
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues nonincreasing
/// and each eigenvector's largest-magnitude entry positive.
pub fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("eigen input"));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut c = eig.eigenvectors.column(src).into_owned();
        if leading_sign(&c) < 0.0 {
            c.neg_mut();
        }
        vecs.set_column(dst, &c);
        vals.push(eig.eigenvalues[src]);
    }
    Ok((vals, vecs))
}

/// Sign of the largest-magnitude entry (first one on ties).
pub fn leading_sign(v: &DVector<f64>) -> f64 {
    let mut best = 0.0f64;
    for &x in v.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Number of singular values above `rel_tol · σ₁`.
pub fn numerical_rank(sigma: &[f64], rel_tol: f64) -> usize {
    match sigma.first() {
        Some(&s1) if s1 > 0.0 => sigma.iter().take_while(|&&s| s > rel_tol * s1).count(),
        _ => 0,
    }
}

/// Principal angles in radians, ascending, between the column spans of `a`
/// and `b`. Columns below `1e-12 · σ₁` do not count toward a span.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch { context: "principal angle operands", expected: a.nrows(), found: b.nrows() });
    }
    let span = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let svd = svd_sorted(m)?;
        let rank = numerical_rank(&svd.sigma, 1e-12);
        if rank == 0 {
            return Err(Error::ZeroData);
        }
        Ok(svd.u.columns(0, rank).into_owned())
    };
    let cosines = svd_sorted(&span(a)?.tr_mul(&span(b)?))?.sigma;
    Ok(cosines.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect())
}

pub(crate) fn check_finite_vec(v: &DVector<f64>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
