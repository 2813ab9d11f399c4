use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Output,
    State,
}

/// Per-trajectory, per-time normalized square errors sharing one
/// denominator. NaN entries mark samples after a divergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurves {
    pub kind: ErrorKind,
    /// Mean of `‖y‖²` over all times and trajectories.
    pub denominator: f64,
    pub curves: Vec<Vec<f64>>,
}

impl ErrorCurves {
    /// Mean over trajectories at each time, skipping NaN entries (NaN when
    /// every trajectory has diverged).
    pub fn mean_curve(&self) -> Vec<f64> {
        let len = self.curves.iter().map(Vec::len).max().unwrap_or(0);
        (0..len)
            .map(|t| {
                let vals: Vec<f64> = self.curves.iter().filter_map(|c| c.get(t)).copied().filter(|v| !v.is_nan()).collect();
                if vals.is_empty() {
                    f64::NAN
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                }
            })
            .collect()
    }

    /// Mean over every finite entry.
    pub fn mean(&self) -> f64 {
        let vals: Vec<f64> = self.curves.iter().flatten().copied().filter(|v| !v.is_nan()).collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }

    pub fn median(&self) -> f64 {
        let mut vals: Vec<f64> = self.curves.iter().flatten().copied().filter(|v| !v.is_nan()).collect();
        if vals.is_empty() {
            return f64::NAN;
        }
        vals.sort_by(f64::total_cmp);
        let mid = vals.len() / 2;
        if vals.len().is_multiple_of(2) {
            0.5 * (vals[mid - 1] + vals[mid])
        } else {
            vals[mid]
        }
    }

    /// Number of trajectories containing a diverged sample.
    pub fn divergence_count(&self) -> usize {
        self.curves.iter().filter(|c| c.iter().any(|v| v.is_nan())).count()
    }
}

/// `‖ŷ(t) − y(t)‖² / avg(‖y‖²)` for each trajectory and time, where the
/// average runs over all times and trajectories of the truth.
pub fn normalized_error(
    predicted: &[Vec<DVector<f64>>],
    truth: &[Vec<DVector<f64>>],
    kind: ErrorKind,
) -> Result<ErrorCurves> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch { context: "trajectory count", expected: truth.len(), found: predicted.len() });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, y) in predicted.iter().zip(truth) {
        if p.len() != y.len() {
            return Err(Error::DimensionMismatch { context: "trajectory length", expected: y.len(), found: p.len() });
        }
        for (pv, yv) in p.iter().zip(y) {
            if pv.len() != yv.len() {
                return Err(Error::DimensionMismatch { context: "sample dimension", expected: yv.len(), found: pv.len() });
            }
            total += yv.norm_squared();
            count += 1;
        }
    }
    let denominator = if count == 0 { 0.0 } else { total / count as f64 };
    if !(denominator > 0.0) {
        return Err(Error::ZeroData);
    }
    let curves = predicted
        .iter()
        .zip(truth)
        .map(|(p, y)| p.iter().zip(y).map(|(pv, yv)| (pv - yv).norm_squared() / denominator).collect())
        .collect();
    Ok(ErrorCurves { kind, denominator, curves })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(v: &[f64]) -> Vec<DVector<f64>> {
        v.iter().map(|x| DVector::from_element(1, *x)).collect()
    }

    #[test]
    fn exact_prediction_has_zero_error() {
        let y = vec![scalars(&[1.0, 2.0, -1.0])];
        let e = normalized_error(&y, &y, ErrorKind::Output).unwrap();
        assert!(e.curves[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_prediction_is_relative_energy() {
        let y = vec![scalars(&[1.0, 2.0]), scalars(&[3.0, 0.0])];
        let z = vec![scalars(&[0.0, 0.0]), scalars(&[0.0, 0.0])];
        let e = normalized_error(&z, &y, ErrorKind::Output).unwrap();
        let avg = (1.0 + 4.0 + 9.0) / 4.0;
        assert_eq!(e.curves, vec![vec![1.0 / avg, 4.0 / avg], vec![9.0 / avg, 0.0]]);
        assert_eq!(e.mean_curve(), vec![5.0 / avg, 2.0 / avg]);
    }

    #[test]
    fn errors() {
        let y = vec![scalars(&[0.0, 0.0])];
        assert!(matches!(normalized_error(&y, &y, ErrorKind::State), Err(Error::ZeroData)));
        let short = vec![scalars(&[1.0])];
        assert!(normalized_error(&short, &vec![scalars(&[1.0, 1.0])], ErrorKind::State).is_err());
    }

    #[test]
    fn nan_samples_count_as_divergence() {
        let y = vec![scalars(&[1.0, 1.0]), scalars(&[1.0, 1.0])];
        let p = vec![scalars(&[1.0, f64::NAN]), scalars(&[0.0, 1.0])];
        let e = normalized_error(&p, &y, ErrorKind::Output).unwrap();
        assert_eq!(e.divergence_count(), 1);
        assert_eq!(e.mean_curve(), vec![0.5, 0.0]);
        assert!((e.mean() - 1.0 / 3.0).abs() < 1e-15);
    }
}
