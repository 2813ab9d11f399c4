use nalgebra::{DMatrix, DVector};

/// Encoder from full states to reduced coordinates `z = h(x)`.
pub trait FeatureMap: Send + Sync {
    fn state_dim(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn features(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Features of each column of `states`, stacked as columns.
    fn features_of(&self, states: &[DVector<f64>]) -> DMatrix<f64> {
        let cols: Vec<_> = states.iter().map(|x| self.features(x)).collect();
        if cols.is_empty() {
            DMatrix::zeros(self.feature_dim(), 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }
}

/// Coordinates with respect to a fixed linear basis: `z = encoderᵀ x`,
/// reconstruction `x ≈ decoder z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoordinates {
    pub encoder: DMatrix<f64>,
    pub decoder: DMatrix<f64>,
}

impl LinearCoordinates {
    pub fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.decoder * z
    }
}

impl FeatureMap for LinearCoordinates {
    fn state_dim(&self) -> usize {
        self.encoder.nrows()
    }
    fn feature_dim(&self) -> usize {
        self.encoder.ncols()
    }
    fn features(&self, x: &DVector<f64>) -> DVector<f64> {
        self.encoder.tr_mul(x)
    }
}

/// Identity features, mostly useful in tests.
#[derive(Debug, Clone, Copy)]
pub struct IdentityFeatures(pub usize);

impl FeatureMap for IdentityFeatures {
    fn state_dim(&self) -> usize {
        self.0
    }
    fn feature_dim(&self) -> usize {
        self.0
    }
    fn features(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }
}
