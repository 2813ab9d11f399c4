//! Kernel ridge regression with a Gaussian RBF kernel.
//!
//! Inputs and targets are divided by their per-coordinate standard
//! deviation (not centered, so the origin stays fixed; zero deviations are
//! left unscaled). The dual weights solve `(K + αI) D = T` with
//! `Kᵢⱼ = exp(−γ‖zᵢ − zⱼ‖²)` on the scaled inputs.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, read_matrix_csv, write_json, write_matrix_csv};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    /// Scaled training inputs, one per column.
    pub inputs: DMatrix<f64>,
    /// Dual weights, `N × c`.
    pub dual: DMatrix<f64>,
    pub params: KrrParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrParams {
    pub rbf_gamma: f64,
    pub ridge_alpha: f64,
    pub input_scale: Vec<f64>,
    pub target_scale: Vec<f64>,
}

fn coordinate_scales(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.ncols() as f64;
    m.row_iter()
        .map(|row| {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect()
}

fn scale_rows(m: &DMatrix<f64>, scales: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, s) in scales.iter().enumerate() {
        out.row_mut(i).unscale_mut(*s);
    }
    out
}

fn rbf(a: &DMatrix<f64>, j: usize, z: &DVector<f64>, gamma: f64) -> f64 {
    let mut d2 = 0.0;
    for i in 0..z.len() {
        let d = a[(i, j)] - z[i];
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

fn solve_regularized(gram: DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = gram.clone().cholesky() {
        let sol = chol.solve(rhs);
        if sol.iter().all(|v| v.is_finite()) {
            return Ok(sol);
        }
    }
    gram.lu().solve(rhs).filter(|s| s.iter().all(|v| v.is_finite())).ok_or(Error::Singular("kernel ridge system"))
}

/// Fits `targets` (`c × N`) from `z` (`d × N`).
pub fn fit_krr(z: &DMatrix<f64>, targets: &DMatrix<f64>, rbf_gamma: f64, ridge_alpha: f64) -> Result<KrrModel> {
    let n = z.ncols();
    if n == 0 {
        return Err(Error::EmptySelection);
    }
    if targets.ncols() != n {
        return Err(Error::DimensionMismatch { context: "regression targets", expected: n, found: targets.ncols() });
    }
    if z.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data"));
    }
    if !(rbf_gamma > 0.0 && rbf_gamma.is_finite()) || !(ridge_alpha >= 0.0 && ridge_alpha.is_finite()) {
        return Err(Error::invalid(format!("bad regression parameters gamma={rbf_gamma}, alpha={ridge_alpha}")));
    }
    let input_scale = coordinate_scales(z);
    let target_scale = coordinate_scales(targets);
    let inputs = scale_rows(z, &input_scale);
    let scaled_targets = scale_rows(targets, &target_scale);
    let mut gram = DMatrix::from_fn(n, n, |i, j| rbf(&inputs, i, &inputs.column(j).into_owned(), rbf_gamma));
    for i in 0..n {
        gram[(i, i)] += ridge_alpha;
    }
    let dual = solve_regularized(gram, &scaled_targets.transpose())?;
    Ok(KrrModel { inputs, dual, params: KrrParams { rbf_gamma, ridge_alpha, input_scale, target_scale } })
}

impl KrrModel {
    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.dual.ncols()
    }

    pub fn predict(&self, z: &DVector<f64>) -> DVector<f64> {
        let zs = DVector::from_iterator(z.len(), z.iter().zip(&self.params.input_scale).map(|(v, s)| v / s));
        let k = DVector::from_iterator(
            self.inputs.ncols(),
            (0..self.inputs.ncols()).map(|j| rbf(&self.inputs, j, &zs, self.params.rbf_gamma)),
        );
        let y = self.dual.tr_mul(&k);
        DVector::from_iterator(y.len(), y.iter().zip(&self.params.target_scale).map(|(v, s)| v * s))
    }

    /// Predictions for each column of `z`.
    pub fn predict_all(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let cols: Vec<_> = z.column_iter().map(|c| self.predict(&c.into_owned())).collect();
        if cols.is_empty() {
            DMatrix::zeros(self.output_dim(), 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }

    /// Writes `inputs.csv`, `dual.csv` and `params.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_matrix_csv(&self.inputs, dir.join("inputs.csv"))?;
        write_matrix_csv(&self.dual, dir.join("dual.csv"))?;
        write_json(&self.params, dir.join("params.json"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            inputs: read_matrix_csv(dir.join("inputs.csv"))?,
            dual: read_matrix_csv(dir.join("dual.csv"))?,
            params: read_json(dir.join("params.json"))?,
        })
    }
}

/// Grid-search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub alpha_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            alpha_grid: vec![1e-8, 1e-6, 1e-4, 1e-2],
            gamma_grid: vec![1e-3, 1e-2, 1e-1, 1.0],
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub alpha: f64,
    pub gamma: f64,
    /// `(alpha, gamma, mean held-out MSE)` for every grid point, alpha-major.
    pub scores: Vec<(f64, f64, f64)>,
}

/// Fold index of every sample. Each group (trajectory) of consecutive
/// samples is cut into `folds` contiguous chunks; the seed rotates which
/// fold each chunk joins.
pub fn assign_folds(group_sizes: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, 0);
    let offset = rng.random_range(0..folds);
    let mut out = Vec::with_capacity(group_sizes.iter().sum());
    for (g, &len) in group_sizes.iter().enumerate() {
        for k in 0..len {
            let chunk = k * folds / len;
            out.push((chunk + offset + g) % folds);
        }
    }
    out
}

fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    m.select_columns(idx.iter())
}

/// `folds`-fold cross-validation over the `(alpha, gamma)` grid. Samples are
/// the columns of `z`/`targets`, grouped into consecutive runs of
/// `group_sizes`. The winner minimizes mean held-out MSE (in units of the
/// overall target deviation); ties go to the larger alpha, then the larger
/// gamma.
pub fn cross_validate_krr(
    z: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    group_sizes: &[usize],
    cv: &CvConfig,
) -> Result<CvResult> {
    let n = z.ncols();
    if cv.alpha_grid.is_empty() || cv.gamma_grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    if cv.folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if n < cv.folds {
        return Err(Error::invalid(format!("{n} samples is fewer than {} folds", cv.folds)));
    }
    if group_sizes.iter().sum::<usize>() != n {
        return Err(Error::DimensionMismatch { context: "cross-validation groups", expected: n, found: group_sizes.iter().sum() });
    }
    let fold_of = assign_folds(group_sizes, cv.folds, cv.seed);
    let target_scale = coordinate_scales(targets);
    let grid: Vec<(f64, f64)> = cv.alpha_grid.iter().flat_map(|&a| cv.gamma_grid.iter().map(move |&g| (a, g))).collect();
    let scores = grid
        .par_iter()
        .map(|&(alpha, gamma)| {
            let mut sse = 0.0;
            let mut count = 0usize;
            for f in 0..cv.folds {
                let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
                let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
                if test.is_empty() || train.is_empty() {
                    continue;
                }
                let model = fit_krr(&select_columns(z, &train), &select_columns(targets, &train), gamma, alpha)?;
                for &i in &test {
                    let pred = model.predict(&z.column(i).into_owned());
                    for (c, s) in target_scale.iter().enumerate() {
                        sse += ((pred[c] - targets[(c, i)]) / s).powi(2);
                        count += 1;
                    }
                }
            }
            let mse = if count == 0 { f64::INFINITY } else { sse / count as f64 };
            Ok((alpha, gamma, if mse.is_nan() { f64::INFINITY } else { mse }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = scores[0];
    for &cand in &scores[1..] {
        let tie = (cand.2 - best.2).abs() <= 1e-12 * best.2.abs().max(f64::MIN_POSITIVE);
        let better = if tie {
            (cand.0, cand.1) > (best.0, best.1)
        } else {
            cand.2 < best.2
        };
        if better {
            best = cand;
        }
    }
    Ok(CvResult { alpha: best.0, gamma: best.1, scores })
}
