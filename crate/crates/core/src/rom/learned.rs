//! Discrete-time models learned in feature coordinates.
//!
//! Dynamics `z(t+1) = f̃(z(t), u(t))` and a reconstruction
//! `c(t) = g̃(z(t))` of the leading linear coordinates are fit by kernel
//! ridge regression; full states are recovered as `x̂ = decoder · c`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::galerkin::BLOW_UP_NORM;
use super::krr::{cross_validate_krr, fit_krr, CvConfig, CvResult, KrrModel};
use super::RomRun;
use crate::error::{Error, Result};
use crate::features::{FeatureMap, LinearCoordinates};
use crate::fom::{DiscreteSystem, Trajectory};
use crate::io::{read_json, read_matrix_csv, write_json, write_matrix_csv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedMeta {
    pub dt: f64,
    pub feature_dim: usize,
    pub linear_dim: usize,
    pub input_dim: usize,
    pub dynamics_cv: CvResult,
    pub reconstruction_cv: CvResult,
}

#[derive(Debug, Clone)]
pub struct LearnedRom<F> {
    pub feature_map: F,
    pub dynamics: KrrModel,
    pub reconstruction: KrrModel,
    pub linear: LinearCoordinates,
    pub meta: LearnedMeta,
}

fn stack(z: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(z.len() + u.len(), z.iter().chain(u.iter()).copied())
}

/// Fits dynamics on pooled `([z(t); u(t)], z(t+1))` pairs and the
/// reconstruction on `(z(t), encoderᵀ x(t))` pairs, selecting each model's
/// hyperparameters by cross-validation with contiguous per-trajectory folds.
pub fn learn_feature_rom<F: FeatureMap>(
    feature_map: F,
    trajectories: &[Trajectory],
    linear: LinearCoordinates,
    cv: &CvConfig,
) -> Result<LearnedRom<F>> {
    let first = trajectories.first().ok_or(Error::EmptySelection)?;
    let dt = first.dt;
    if trajectories.iter().any(|t| (t.dt - dt).abs() > 1e-12 * dt.abs()) {
        return Err(Error::invalid("trajectories have inconsistent sampling intervals"));
    }
    let n = feature_map.state_dim();
    let r = feature_map.feature_dim();
    let big_r = linear.encoder.ncols();
    if linear.encoder.nrows() != n || linear.decoder.shape() != linear.encoder.shape() {
        return Err(Error::DimensionMismatch { context: "linear basis rows", expected: n, found: linear.encoder.nrows() });
    }
    if big_r < r {
        return Err(Error::invalid(format!("linear basis dimension {big_r} is below feature dimension {r}")));
    }
    let q = first.inputs.first().map_or(0, |u| u.len());

    let mut dyn_in = Vec::new();
    let mut dyn_out = Vec::new();
    let mut dyn_groups = Vec::new();
    let mut rec_in = Vec::new();
    let mut rec_out = Vec::new();
    let mut rec_groups = Vec::new();
    for traj in trajectories {
        let z: Vec<DVector<f64>> = traj.states.iter().map(|x| feature_map.features(x)).collect();
        for k in 0..traj.steps() {
            dyn_in.push(stack(&z[k], &traj.input_at(k, q)));
            dyn_out.push(z[k + 1].clone());
        }
        dyn_groups.push(traj.steps());
        for (zk, x) in z.iter().zip(&traj.states) {
            rec_in.push(zk.clone());
            rec_out.push(linear.encoder.tr_mul(x));
        }
        rec_groups.push(traj.states.len());
    }
    if dyn_in.is_empty() {
        return Err(Error::EmptySelection);
    }
    let (dyn_in, dyn_out) = (DMatrix::from_columns(&dyn_in), DMatrix::from_columns(&dyn_out));
    let (rec_in, rec_out) = (DMatrix::from_columns(&rec_in), DMatrix::from_columns(&rec_out));

    let dynamics_cv = cross_validate_krr(&dyn_in, &dyn_out, &dyn_groups, cv)?;
    let dynamics = fit_krr(&dyn_in, &dyn_out, dynamics_cv.gamma, dynamics_cv.alpha)?;
    let reconstruction_cv = cross_validate_krr(&rec_in, &rec_out, &rec_groups, cv)?;
    let reconstruction = fit_krr(&rec_in, &rec_out, reconstruction_cv.gamma, reconstruction_cv.alpha)?;
    Ok(LearnedRom {
        feature_map,
        dynamics,
        reconstruction,
        linear,
        meta: LearnedMeta { dt, feature_dim: r, linear_dim: big_r, input_dim: q, dynamics_cv, reconstruction_cv },
    })
}

impl<F: FeatureMap> LearnedRom<F> {
    /// Full-state estimate from features.
    pub fn reconstruct(&self, z: &DVector<f64>) -> DVector<f64> {
        self.linear.lift(&self.reconstruction.predict(z))
    }

    /// Runs from `z(0) = h(x0)`; outputs are filled when `output` is given.
    pub fn simulate(&self, x0: &DVector<f64>, inputs: &[DVector<f64>], output: Option<&dyn DiscreteSystem>) -> RomRun {
        let q = self.meta.input_dim;
        let (r, n) = (self.meta.feature_dim, self.linear.decoder.nrows());
        let m = output.map_or(0, |s| s.output_dim());
        let mut run = RomRun::with_capacity(inputs.len() + 1);
        let mut z = self.feature_map.features(x0);
        for k in 0..=inputs.len() {
            if run.diverged_at.is_some() {
                run.diverge(k, r, n, m);
                continue;
            }
            let u = inputs.get(k).cloned().unwrap_or_else(|| DVector::zeros(q));
            let x = self.reconstruct(&z);
            if !z.iter().chain(x.iter()).all(|v| v.is_finite()) || x.norm() > BLOW_UP_NORM {
                run.diverge(k, r, n, m);
                continue;
            }
            if let Some(sys) = output {
                run.outputs.push(sys.output(&x, &u));
            }
            run.states.push(x);
            let next = self.dynamics.predict(&stack(&z, &u));
            run.reduced.push(std::mem::replace(&mut z, next));
        }
        run
    }

    /// Writes the regression models, linear basis and metadata; the feature
    /// map is saved separately.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.dynamics.save(dir.join("dynamics"))?;
        self.reconstruction.save(dir.join("reconstruction"))?;
        write_matrix_csv(&self.linear.encoder, dir.join("encoder.csv"))?;
        write_matrix_csv(&self.linear.decoder, dir.join("decoder.csv"))?;
        write_json(&self.meta, dir.join("meta.json"))
    }

    pub fn load(dir: impl AsRef<Path>, feature_map: F) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: LearnedMeta = read_json(dir.join("meta.json"))?;
        if feature_map.feature_dim() != meta.feature_dim {
            return Err(Error::DimensionMismatch { context: "feature map dimension", expected: meta.feature_dim, found: feature_map.feature_dim() });
        }
        Ok(Self {
            feature_map,
            dynamics: KrrModel::load(dir.join("dynamics"))?,
            reconstruction: KrrModel::load(dir.join("reconstruction"))?,
            linear: LinearCoordinates {
                encoder: read_matrix_csv(dir.join("encoder.csv"))?,
                decoder: read_matrix_csv(dir.join("decoder.csv"))?,
            },
            meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::IdentityFeatures;
    use crate::fom::{simulate, DiscreteLti};

    fn lti() -> DiscreteLti {
        DiscreteLti::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.2, -0.1, 0.8]),
            DMatrix::zeros(2, 1),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap()
    }

    fn training(sys: &DiscreteLti) -> Vec<Trajectory> {
        let starts = [[1.0, 0.0], [0.0, 1.0], [-0.7, 0.4], [0.5, -0.8], [0.3, 0.9]];
        starts
            .iter()
            .map(|s| simulate(sys, &DVector::from_row_slice(s), &vec![DVector::zeros(1); 12], 1.0).unwrap())
            .collect()
    }

    fn cv() -> CvConfig {
        CvConfig { alpha_grid: vec![1e-10, 1e-8], gamma_grid: vec![0.05, 0.2], folds: 5, seed: 3 }
    }

    #[test]
    fn identity_features_learn_linear_map() {
        let sys = lti();
        let trajs = training(&sys);
        let eye = DMatrix::<f64>::identity(2, 2);
        let linear = LinearCoordinates { encoder: eye.clone(), decoder: eye };
        let rom = learn_feature_rom(IdentityFeatures(2), &trajs, linear, &cv()).unwrap();
        let mut worst: f64 = 0.0;
        for t in &trajs {
            for k in 0..t.steps() {
                let pred = rom.dynamics.predict(&stack(&t.states[k], &DVector::zeros(1)));
                worst = worst.max((pred - &t.states[k + 1]).norm());
            }
        }
        assert!(worst < 1e-4, "{worst}");
        assert_eq!(rom.reconstruct(&DVector::from_vec(vec![0.2, 0.1])).len(), 2);
    }

    #[test]
    fn shapes_dt_and_round_trip() {
        let sys = lti();
        let mut trajs = training(&sys);
        let enc = DMatrix::<f64>::identity(2, 2);
        let linear = LinearCoordinates { encoder: enc.clone(), decoder: enc };
        let rom = learn_feature_rom(IdentityFeatures(2), &trajs, linear.clone(), &cv()).unwrap();
        let run = rom.simulate(&trajs[0].states[0], &vec![DVector::zeros(1); 5], Some(&sys));
        assert_eq!(run.states.len(), 6);
        assert_eq!(run.outputs[0].len(), 1);
        let dir = tempfile::tempdir().unwrap();
        rom.save(dir.path()).unwrap();
        let back = LearnedRom::load(dir.path(), IdentityFeatures(2)).unwrap();
        assert_eq!(back.dynamics, rom.dynamics);
        assert_eq!(back.meta, rom.meta);
        trajs[1].dt = 0.5;
        assert!(learn_feature_rom(IdentityFeatures(2), &trajs, linear, &cv()).is_err());
    }
}
