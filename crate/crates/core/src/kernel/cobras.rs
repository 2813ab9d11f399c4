//! Kernel covariance balancing.
//!
//! With state samples `xⱼ` (weights `wⱼ`) and gradient samples `gᵢ` taken
//! at `x̃ᵢ` (weights `wᵢ`), the balancing matrix is
//!
//! ```text
//! [Y*X]ᵢⱼ = wᵢ gᵢᵀ G(x̃ᵢ)⁻¹ (∇K_{xⱼ}(x̃ᵢ) − ∇K₀(x̃ᵢ)) wⱼ
//! ```
//!
//! and, with `Y*X = UΣVᵀ`, the features are
//! `h(x) = Σ_r^{-1/2} U_rᵀ (Y*K_x − Y*K₀)`, where
//! `[Y*K_x]ᵢ = wᵢ gᵢᵀ G(x̃ᵢ)⁻¹ ∇K_x(x̃ᵢ)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::KernelSpec;
use crate::balance::RANK_TOL;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::io::{read_json, read_matrix_csv, read_values_csv, write_json, write_matrix_csv, write_values_csv};
use crate::linalg::{numerical_rank, svd_sorted};
use crate::sampling::{SampleKind, SnapshotMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub kernel: KernelSpec,
    pub r: usize,
    pub requested_r: usize,
    pub state_weights: Vec<f64>,
    pub gradient_weights: Vec<f64>,
    /// Every singular value of `Y*X`.
    pub spectrum: Vec<f64>,
}

/// Fitted nonlinear feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFeatureMap {
    /// Unscaled state samples, one per column.
    pub state_samples: DMatrix<f64>,
    /// Gradient anchor states `x̃ᵢ`, one per column.
    pub anchors: DMatrix<f64>,
    /// Unscaled gradients `gᵢ`, one per column.
    pub gradients: DMatrix<f64>,
    pub u_r: DMatrix<f64>,
    pub sigma_r: Vec<f64>,
    pub v_r: DMatrix<f64>,
    /// `Y*K₀`.
    pub y_star_k0: DVector<f64>,
    pub meta: KernelMeta,
    /// `wᵢ G(x̃ᵢ)⁻¹ gᵢ`, one per column.
    lifted: DMatrix<f64>,
}

fn lift_gradients(kernel: &KernelSpec, anchors: &DMatrix<f64>, gradients: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = (0..gradients.ncols())
        .into_par_iter()
        .map(|i| {
            kernel.apply_g_inverse(&anchors.column(i).into_owned(), &gradients.column(i).into_owned()) * weights[i]
        })
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(anchors.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// `[Y*K_x]ᵢ` for every gradient sample.
fn y_star_k(kernel: &KernelSpec, anchors: &DMatrix<f64>, lifted: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let vals: Vec<f64> = (0..lifted.ncols())
        .into_par_iter()
        .map(|i| lifted.column(i).dot(&kernel.grad(&anchors.column(i).into_owned(), x)))
        .collect();
    DVector::from_vec(vals)
}

/// Kernel balancing from snapshot matrices: states from `x`, gradient pairs
/// and weights from `y`.
pub fn kernel_balance(kernel: &KernelSpec, x: &SnapshotMatrix, y: &SnapshotMatrix, r: usize) -> Result<KernelFeatureMap> {
    if x.kind() != SampleKind::State || y.kind() != SampleKind::Gradient {
        return Err(Error::invalid("kernel balancing needs a state matrix and a gradient matrix"));
    }
    let anchors = DMatrix::from_columns(y.anchors());
    kernel_balance_weighted(kernel, x.raw(), x.weights(), &anchors, y.raw(), y.weights(), r)
}

/// Kernel balancing from explicit samples and weights.
pub fn kernel_balance_weighted(
    kernel: &KernelSpec,
    states: &DMatrix<f64>,
    state_weights: &[f64],
    anchors: &DMatrix<f64>,
    gradients: &DMatrix<f64>,
    gradient_weights: &[f64],
    r: usize,
) -> Result<KernelFeatureMap> {
    kernel.validate()?;
    let n = states.nrows();
    let (s_x, s_g) = (states.ncols(), gradients.ncols());
    if anchors.nrows() != n || gradients.nrows() != n {
        return Err(Error::DimensionMismatch { context: "kernel sample state dimension", expected: n, found: gradients.nrows() });
    }
    if anchors.ncols() != s_g || gradient_weights.len() != s_g || state_weights.len() != s_x {
        return Err(Error::DimensionMismatch { context: "kernel sample count", expected: s_g, found: anchors.ncols() });
    }
    if r == 0 {
        return Err(Error::invalid("reduced dimension must be at least 1"));
    }
    if r > s_x.min(s_g) {
        return Err(Error::RankTooLarge { requested: r, max: s_x.min(s_g) });
    }
    let lifted = lift_gradients(kernel, anchors, gradients, gradient_weights);
    let zero = DVector::zeros(n);
    let y_star_k0 = y_star_k(kernel, anchors, &lifted, &zero);
    let columns: Vec<DVector<f64>> = (0..s_x)
        .into_par_iter()
        .map(|j| (y_star_k(kernel, anchors, &lifted, &states.column(j).into_owned()) - &y_star_k0) * state_weights[j])
        .collect();
    let m = DMatrix::from_columns(&columns);

    let svd = svd_sorted(&m)?;
    if svd.sigma.first().is_none_or(|&s| s <= 0.0) {
        return Err(Error::ZeroData);
    }
    let rho = numerical_rank(&svd.sigma, RANK_TOL);
    let rank = r.min(rho);
    if rank < r {
        log::warn!("requested rank {r} exceeds numerical rank {rho} of the kernel balancing matrix; truncating");
    }
    Ok(KernelFeatureMap {
        state_samples: states.clone(),
        anchors: anchors.clone(),
        gradients: gradients.clone(),
        u_r: svd.u.columns(0, rank).into_owned(),
        sigma_r: svd.sigma[..rank].to_vec(),
        v_r: svd.v.columns(0, rank).into_owned(),
        y_star_k0,
        meta: KernelMeta {
            kernel: *kernel,
            r: rank,
            requested_r: r,
            state_weights: state_weights.to_vec(),
            gradient_weights: gradient_weights.to_vec(),
            spectrum: svd.sigma,
        },
        lifted,
    })
}

impl KernelFeatureMap {
    pub fn kernel(&self) -> &KernelSpec {
        &self.meta.kernel
    }

    pub fn rank(&self) -> usize {
        self.sigma_r.len()
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.meta.spectrum
    }

    fn inv_sqrt_sigma(&self) -> DVector<f64> {
        DVector::from_iterator(self.rank(), self.sigma_r.iter().map(|s| s.powf(-0.5)))
    }

    /// `z = h(x)`.
    pub fn nonlinear_features(&self, x: &DVector<f64>) -> DVector<f64> {
        let centered = y_star_k(&self.meta.kernel, &self.anchors, &self.lifted, x) - &self.y_star_k0;
        self.u_r.tr_mul(&centered).component_mul(&self.inv_sqrt_sigma())
    }

    /// `Dh(x) v`.
    pub fn feature_derivative(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let kernel = self.meta.kernel;
        let w: Vec<f64> = (0..self.lifted.ncols())
            .into_par_iter()
            .map(|i| self.lifted.column(i).dot(&kernel.cross_hessian_apply(&self.anchors.column(i).into_owned(), x, v)))
            .collect();
        self.u_r.tr_mul(&DVector::from_vec(w)).component_mul(&self.inv_sqrt_sigma())
    }

    /// Features of the stored state samples without kernel evaluations:
    /// column `j` is `Σ_r^{1/2} V_rᵀ eⱼ / wⱼ`.
    pub fn training_features(&self) -> DMatrix<f64> {
        let sqrt_sigma = DVector::from_iterator(self.rank(), self.sigma_r.iter().map(|s| s.sqrt()));
        let mut z = DMatrix::from_diagonal(&sqrt_sigma) * self.v_r.transpose();
        for (j, w) in self.meta.state_weights.iter().enumerate() {
            z.column_mut(j).unscale_mut(*w);
        }
        z
    }

    /// Writes `kernel.json`, the sample matrices and the factors into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_json(&self.meta, dir.join("kernel.json"))?;
        write_matrix_csv(&self.state_samples, dir.join("states.csv"))?;
        write_matrix_csv(&self.anchors, dir.join("anchors.csv"))?;
        write_matrix_csv(&self.gradients, dir.join("gradients.csv"))?;
        write_matrix_csv(&self.u_r, dir.join("u_r.csv"))?;
        write_values_csv(&self.sigma_r, dir.join("sigma.csv"))?;
        write_matrix_csv(&self.v_r, dir.join("v_r.csv"))?;
        write_values_csv(self.y_star_k0.as_slice(), dir.join("y_star_k0.csv"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: KernelMeta = read_json(dir.join("kernel.json"))?;
        let anchors = read_matrix_csv(dir.join("anchors.csv"))?;
        let gradients = read_matrix_csv(dir.join("gradients.csv"))?;
        if gradients.ncols() != meta.gradient_weights.len() || anchors.shape() != gradients.shape() {
            return Err(Error::DimensionMismatch {
                context: "stored gradient samples",
                expected: meta.gradient_weights.len(),
                found: gradients.ncols(),
            });
        }
        let lifted = lift_gradients(&meta.kernel, &anchors, &gradients, &meta.gradient_weights);
        Ok(Self {
            state_samples: read_matrix_csv(dir.join("states.csv"))?,
            u_r: read_matrix_csv(dir.join("u_r.csv"))?,
            sigma_r: read_values_csv(dir.join("sigma.csv"))?,
            v_r: read_matrix_csv(dir.join("v_r.csv"))?,
            y_star_k0: DVector::from_vec(read_values_csv(dir.join("y_star_k0.csv"))?),
            anchors,
            gradients,
            meta,
            lifted,
        })
    }
}

impl FeatureMap for KernelFeatureMap {
    fn state_dim(&self) -> usize {
        self.state_samples.nrows()
    }
    fn feature_dim(&self) -> usize {
        self.rank()
    }
    fn features(&self, x: &DVector<f64>) -> DVector<f64> {
        self.nonlinear_features(x)
    }
}
