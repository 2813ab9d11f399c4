//! Kernel PCA centered about the origin.
//!
//! With origin-centered kernel `k̃(x, y) = K(x,y) − K(x,0) − K(0,y) + K(0,0)`
//! and weighted Gram matrix `Wk̃W = VΛVᵀ` (`W = diag(wⱼ)`, so `(1/s)G̃` for
//! uniform weights), the features are
//! `z_k(x) = λ_k^{-1/2} Σⱼ v_jk wⱼ k̃(xⱼ, x)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::KernelSpec;
use crate::balance::RANK_TOL;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::symmetric_eigen_sorted;
use crate::sampling::SnapshotMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct KpcaMap {
    pub kernel: KernelSpec,
    pub states: DMatrix<f64>,
    pub weights: Vec<f64>,
    /// Leading eigenvalues of the weighted centered Gram matrix.
    pub eigenvalues: Vec<f64>,
    /// Columns `λ_k^{-1/2} W v_k`.
    coefficients: DMatrix<f64>,
    k_at_zero: Vec<f64>,
    k00: f64,
}

impl KpcaMap {
    pub fn fit(kernel: &KernelSpec, x: &SnapshotMatrix, r: usize) -> Result<Self> {
        Self::fit_weighted(kernel, x.raw(), x.weights(), r)
    }

    pub fn fit_weighted(kernel: &KernelSpec, states: &DMatrix<f64>, weights: &[f64], r: usize) -> Result<Self> {
        kernel.validate()?;
        let s = states.ncols();
        if weights.len() != s {
            return Err(Error::DimensionMismatch { context: "kpca weights", expected: s, found: weights.len() });
        }
        if r == 0 {
            return Err(Error::invalid("reduced dimension must be at least 1"));
        }
        if r > s {
            return Err(Error::RankTooLarge { requested: r, max: s });
        }
        let zero = DVector::zeros(states.nrows());
        let cols: Vec<DVector<f64>> = (0..s).map(|j| states.column(j).into_owned()).collect();
        let k00 = kernel.eval(&zero, &zero);
        let k_at_zero: Vec<f64> = cols.iter().map(|x| kernel.eval(x, &zero)).collect();
        let rows: Vec<Vec<f64>> = (0..s)
            .into_par_iter()
            .map(|i| {
                (0..s)
                    .map(|j| {
                        let centered = kernel.eval(&cols[i], &cols[j]) - k_at_zero[i] - k_at_zero[j] + k00;
                        weights[i] * centered * weights[j]
                    })
                    .collect()
            })
            .collect();
        let gram = DMatrix::from_fn(s, s, |i, j| rows[i][j]);
        let (vals, vecs) = symmetric_eigen_sorted(&gram)?;
        let lead = vals.first().copied().unwrap_or(0.0);
        if lead <= 0.0 {
            return Err(Error::ZeroData);
        }
        let positive = vals.iter().take_while(|&&v| v > RANK_TOL * lead).count();
        let rank = r.min(positive);
        if rank < r {
            log::warn!("kernel PCA: only {positive} eigenvalues above tolerance; truncating from {r}");
        }
        let mut coefficients = vecs.columns(0, rank).into_owned();
        for k in 0..rank {
            coefficients.column_mut(k).scale_mut(vals[k].powf(-0.5));
        }
        for (j, w) in weights.iter().enumerate() {
            coefficients.row_mut(j).scale_mut(*w);
        }
        Ok(Self {
            kernel: *kernel,
            states: states.clone(),
            weights: weights.to_vec(),
            eigenvalues: vals[..rank].to_vec(),
            coefficients,
            k_at_zero,
            k00,
        })
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    fn centered_kernel_column(&self, x: &DVector<f64>) -> DVector<f64> {
        let zero = DVector::zeros(x.len());
        let kx0 = self.kernel.eval(&zero, x);
        let vals: Vec<f64> = (0..self.states.ncols())
            .into_par_iter()
            .map(|j| self.kernel.eval(&self.states.column(j).into_owned(), x) - self.k_at_zero[j] - kx0 + self.k00)
            .collect();
        DVector::from_vec(vals)
    }

    pub fn kpca_features(&self, x: &DVector<f64>) -> DVector<f64> {
        self.coefficients.tr_mul(&self.centered_kernel_column(x))
    }
}

impl FeatureMap for KpcaMap {
    fn state_dim(&self) -> usize {
        self.states.nrows()
    }
    fn feature_dim(&self) -> usize {
        self.rank()
    }
    fn features(&self, x: &DVector<f64>) -> DVector<f64> {
        self.kpca_features(x)
    }
}

/// One-shot KPCA: fits on `x` and returns the features of `point`.
pub fn kpca_features(kernel: &KernelSpec, x: &SnapshotMatrix, r: usize, point: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(KpcaMap::fit(kernel, x, r)?.kpca_features(point))
}
