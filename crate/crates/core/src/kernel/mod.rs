//! Smooth kernels with closed-form derivatives, kernel balancing and KPCA.
//!
//! For a kernel `K` with feature map `Φ_K`, the pieces needed to lift
//! gradients and evaluate features without touching the feature space are
//!
//! | family     | `K(x, y)`              | `∇K_y(x)`                 | `G(x)⁻¹`                                        |
//! |------------|------------------------|---------------------------|-------------------------------------------------|
//! | linear     | `α + xᵀy`              | `y`                       | `I`                                             |
//! | polynomial | `(α + xᵀy)^p`          | `p(α + xᵀy)^{p−1} y`      | `[I − (p−1)xxᵀ/(α + p‖x‖²)] / (p(α + ‖x‖²)^{p−1})` |
//! | gaussian   | `exp(−‖x−y‖²/2σ²)`     | `−K(x, y)(x − y)/σ²`      | `σ² I`                                          |
//!
//! plus the mixed second derivative `H(x, y) = DΦ_K(x)* DΦ_K(y)` with
//! entries `∂²K/∂xᵢ∂yⱼ`. Every operation here costs `O(n)`.

mod cobras;
mod kpca;

pub use cobras::{kernel_balance, kernel_balance_weighted, KernelFeatureMap, KernelMeta};
pub use kpca::{kpca_features, KpcaMap};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear { alpha: f64 },
    Polynomial { alpha: f64, p: f64 },
    Gaussian { sigma: f64 },
}

fn pow(base: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < i32::MAX as f64 {
        base.powi(e as i32)
    } else {
        base.powf(e)
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            KernelSpec::Linear { alpha } => alpha.is_finite() && alpha >= 0.0,
            KernelSpec::Polynomial { alpha, p } => alpha.is_finite() && alpha > 0.0 && p.is_finite() && p > 1.0,
            KernelSpec::Gaussian { sigma } => sigma.is_finite() && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid kernel parameters: {self:?}")))
        }
    }

    /// `K(x, y)`.
    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match *self {
            KernelSpec::Linear { alpha } => alpha + x.dot(y),
            KernelSpec::Polynomial { alpha, p } => pow(alpha + x.dot(y), p),
            KernelSpec::Gaussian { sigma } => (-(x - y).norm_squared() / (2.0 * sigma * sigma)).exp(),
        }
    }

    /// `∇K_y(x)`, the gradient of `K(·, y)` at `x`.
    pub fn grad(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        match *self {
            KernelSpec::Linear { .. } => y.clone(),
            KernelSpec::Polynomial { alpha, p } => y * (p * pow(alpha + x.dot(y), p - 1.0)),
            KernelSpec::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                (x - y) * (-self.eval(x, y) / s2)
            }
        }
    }

    /// `G(x)⁻¹ v`, where `G(x)ᵢⱼ = ∂²K/∂xᵢ∂yⱼ` at `(x, x)`.
    pub fn apply_g_inverse(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match *self {
            KernelSpec::Linear { .. } => v.clone(),
            KernelSpec::Polynomial { alpha, p } => {
                let nx2 = x.norm_squared();
                let c = (p - 1.0) / (alpha + p * nx2);
                (v - x * (c * x.dot(v))) / (p * pow(alpha + nx2, p - 1.0))
            }
            KernelSpec::Gaussian { sigma } => v * (sigma * sigma),
        }
    }

    /// `H(x, y) v` with `H(x, y)ᵢⱼ = ∂²K/∂xᵢ∂yⱼ`.
    pub fn cross_hessian_apply(&self, x: &DVector<f64>, y: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match *self {
            KernelSpec::Linear { .. } => v.clone(),
            KernelSpec::Polynomial { alpha, p } => {
                let a = alpha + x.dot(y);
                v * (p * pow(a, p - 1.0)) + y * (p * (p - 1.0) * pow(a, p - 2.0) * x.dot(v))
            }
            KernelSpec::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                let d = x - y;
                let k = self.eval(x, y);
                (v - &d * (d.dot(v) / s2)) * (k / s2)
            }
        }
    }

    /// Condition number of `G(x)` in the 2-norm.
    pub fn g_condition(&self, x: &DVector<f64>) -> f64 {
        match *self {
            KernelSpec::Linear { .. } | KernelSpec::Gaussian { .. } => 1.0,
            KernelSpec::Polynomial { alpha, p } => {
                let nx2 = x.norm_squared();
                1.0 + (p - 1.0) * nx2 / (alpha + nx2)
            }
        }
    }
}

/// Spot checks of the conditions under which gradients lift into the
/// kernel feature space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    /// Smallest `K(x,x) − 2K(x,y) + K(y,y)` over distinct sample pairs;
    /// positive when the feature map separates them.
    pub min_separation: f64,
    /// Largest condition number of `G` over the samples.
    pub max_g_condition: f64,
}

/// Checks feature-map separation over all pairs of `points` (skipping
/// coincident ones) and the conditioning of `G`. Logs a warning instead of
/// failing when either looks degenerate.
pub fn injectivity_diagnostic(kernel: &KernelSpec, points: &[DVector<f64>]) -> InjectivityReport {
    let mut min_separation = f64::INFINITY;
    for (i, x) in points.iter().enumerate() {
        for y in &points[i + 1..] {
            if x == y {
                continue;
            }
            let sep = kernel.eval(x, x) - 2.0 * kernel.eval(x, y) + kernel.eval(y, y);
            min_separation = min_separation.min(sep);
        }
    }
    let max_g_condition = points.iter().map(|x| kernel.g_condition(x)).fold(1.0, f64::max);
    if min_separation <= 0.0 {
        log::warn!("kernel feature map does not separate all sample pairs (min separation {min_separation:e})");
    }
    if max_g_condition > 1e12 {
        log::warn!("derivative Gram matrix is ill-conditioned (condition {max_g_condition:e})");
    }
    InjectivityReport { min_separation, max_g_condition }
}
