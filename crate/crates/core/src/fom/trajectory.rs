use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::DiscreteSystem;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// States `x(0..=T)` and the inputs `u(0..T)` that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    /// Index of the first sample on the global time grid.
    pub t0: usize,
    pub dt: f64,
}

impl Trajectory {
    /// Number of steps `T` (one less than the number of states).
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, |x| x.len())
    }

    /// Input applied at sample `k`; zero at the final sample, where no
    /// input was recorded.
    pub fn input_at(&self, k: usize, input_dim: usize) -> DVector<f64> {
        self.inputs.get(k).cloned().unwrap_or_else(|| DVector::zeros(input_dim))
    }

    /// Time of sample `k`.
    pub fn time(&self, k: usize) -> f64 {
        (self.t0 + k) as f64 * self.dt
    }

    /// Outputs `y(k) = g(x(k), u(k))` along the trajectory.
    pub fn outputs<S: DiscreteSystem + ?Sized>(&self, sys: &S) -> Vec<DVector<f64>> {
        let q = sys.input_dim();
        self.states
            .iter()
            .enumerate()
            .map(|(k, x)| sys.output(x, &self.input_at(k, q)))
            .collect()
    }

    /// Prefix of the first `len` states.
    pub fn truncated(&self, len: usize) -> Trajectory {
        let len = len.min(self.states.len());
        Trajectory {
            states: self.states[..len].to_vec(),
            inputs: self.inputs[..len.saturating_sub(1).min(self.inputs.len())].to_vec(),
            t0: self.t0,
            dt: self.dt,
        }
    }

    /// Writes `t,x1..xn,u1..uq,y1..ym`, one row per sample. The final row
    /// leaves the input fields empty.
    pub fn write_csv<S: DiscreteSystem + ?Sized>(&self, sys: &S, path: impl AsRef<Path>) -> Result<()> {
        let (n, q, m) = (sys.state_dim(), sys.input_dim(), sys.output_dim());
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=q).map(|i| format!("u{i}")));
        header.extend((1..=m).map(|i| format!("y{i}")));
        w.write_record(&header)?;
        let ys = self.outputs(sys);
        for (k, x) in self.states.iter().enumerate() {
            let mut row = vec![fmt_f64(self.time(k))];
            row.extend(x.iter().map(|v| fmt_f64(*v)));
            match self.inputs.get(k) {
                Some(u) => row.extend(u.iter().map(|v| fmt_f64(*v))),
                None => row.extend(std::iter::repeat_n(String::new(), q)),
            }
            row.extend(ys[k].iter().map(|v| fmt_f64(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a trajectory written by [`Trajectory::write_csv`]; outputs are
    /// ignored.
    pub fn read_csv(path: impl AsRef<Path>, state_dim: usize, input_dim: usize, dt: f64) -> Result<Trajectory> {
        let mut r = csv::Reader::from_path(path)?;
        let mut states = Vec::new();
        let mut inputs = Vec::new();
        let mut t_first = None;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() < 1 + state_dim + input_dim {
                return Err(Error::DimensionMismatch {
                    context: "trajectory csv columns",
                    expected: 1 + state_dim + input_dim,
                    found: rec.len(),
                });
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad number {s:?}: {e}")));
            if t_first.is_none() {
                t_first = Some(parse(&rec[0])?);
            }
            let x = (1..=state_dim).map(|i| parse(&rec[i])).collect::<Result<Vec<_>>>()?;
            states.push(DVector::from_vec(x));
            if !rec[1 + state_dim].trim().is_empty() || input_dim == 0 {
                let u = (0..input_dim)
                    .map(|i| parse(&rec[1 + state_dim + i]))
                    .collect::<Result<Vec<_>>>()?;
                inputs.push(DVector::from_vec(u));
            }
        }
        inputs.truncate(states.len().saturating_sub(1));
        let t0 = (t_first.unwrap_or(0.0) / dt).round().max(0.0) as usize;
        Ok(Trajectory { states, inputs, t0, dt })
    }
}

/// Runs the system from `x0` under `inputs`, returning `T + 1` states.
///
/// A non-finite state is reported as [`Error::BlowUp`] with the index of
/// the failing step.
pub fn simulate<S: DiscreteSystem + ?Sized>(
    sys: &S,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    dt: f64,
) -> Result<Trajectory> {
    if x0.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch { context: "initial state", expected: sys.state_dim(), found: x0.len() });
    }
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(x0.clone());
    for (k, u) in inputs.iter().enumerate() {
        if u.len() != sys.input_dim() {
            return Err(Error::DimensionMismatch { context: "input", expected: sys.input_dim(), found: u.len() });
        }
        let next = sys.step(&states[k], u).map_err(|e| match e {
            Error::NonFinite(_) => Error::BlowUp { step: k },
            other => other,
        })?;
        states.push(next);
    }
    Ok(Trajectory { states, inputs: inputs.to_vec(), t0: 0, dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{impulse_state, toy_system};

    #[test]
    fn zero_steps_gives_single_state() {
        let sys = toy_system(0.5, 50).unwrap();
        let traj = simulate(&sys, &impulse_state(1.0), &[], 0.5).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.steps(), 0);
    }

    #[test]
    fn replay_reproduces_states_exactly() {
        let sys = toy_system(0.5, 50).unwrap();
        let inputs: Vec<_> = (0..8).map(|k| DVector::from_element(1, (0.5 * k as f64).sin())).collect();
        let traj = simulate(&sys, &impulse_state(0.3), &inputs, 0.5).unwrap();
        for k in 0..traj.steps() {
            assert_eq!(sys.step(&traj.states[k], &traj.inputs[k]).unwrap(), traj.states[k + 1]);
        }
    }

    #[test]
    fn origin_is_preserved_exactly() {
        let sys = toy_system(0.5, 50).unwrap();
        let inputs = vec![DVector::zeros(1); 20];
        let traj = simulate(&sys, &DVector::zeros(3), &inputs, 0.5).unwrap();
        assert!(traj.states.iter().all(|x| x.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn blow_up_reports_step() {
        let sys = crate::fom::DiscreteLti::new(
            nalgebra::DMatrix::from_element(1, 1, 1e200),
            nalgebra::DMatrix::zeros(1, 1),
            nalgebra::DMatrix::zeros(1, 1),
        )
        .unwrap();
        let inputs = vec![DVector::zeros(1); 5];
        let err = simulate(&sys, &DVector::from_element(1, 1.0), &inputs, 1.0).unwrap_err();
        assert!(matches!(err, Error::BlowUp { step: 1 }), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let sys = toy_system(0.5, 10).unwrap();
        let inputs: Vec<_> = (0..4).map(|k| DVector::from_element(1, 0.1 * k as f64)).collect();
        let traj = simulate(&sys, &impulse_state(0.7), &inputs, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        traj.write_csv(&sys, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,x1,x2,x3,u1,y1\n"));
        let back = Trajectory::read_csv(&path, 3, 1, 0.5).unwrap();
        assert_eq!(back, traj);
    }
}
