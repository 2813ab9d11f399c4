//! Covariance factors from trajectory data.
//!
//! A [`SnapshotMatrix`] holds samples as columns, each scaled so that
//! `data · dataᵀ` is the empirical second-moment matrix: states scaled by
//! `1/√s_x`, gradients by `1/√s_g` times any block weight. Gradients come
//! from the adjoint recursion
//!
//! ```text
//! g_η(t_f, 0)     = D_x g(x(t_f))ᵀ η
//! g_η(t_f − k, k) = D_x f(x(t_f − k), u(t_f − k))ᵀ g_η(t_f − k + 1, k − 1)
//! ```
//!
//! run backward along stored trajectories, with random output directions
//! `η` satisfying `E[ηηᵀ] = (L + 1) I`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::{DiscreteSystem, Trajectory};
use crate::io::{read_json, read_matrix_csv, write_json, write_matrix_csv};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    State,
    Gradient,
}

/// Distribution of the unit-covariance vector `ζ` behind `η = √(L+1) ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaDistribution {
    #[default]
    Gaussian,
    Rademacher,
}

/// Parameters for gradient sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSampleSpec {
    /// Horizon `L`.
    pub horizon: usize,
    /// Number of draws `s_g`.
    pub samples: usize,
    #[serde(default)]
    pub eta: EtaDistribution,
    pub seed: u64,
}

/// `ξ = e_τ ⊗ η`: output direction `η` placed at horizon offset `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomDirection {
    pub tau: usize,
    pub eta: DVector<f64>,
}

/// Sidecar metadata for a [`SnapshotMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub kind: SampleKind,
    pub n: usize,
    /// Number of draws (`s_x` or `s_g`); may be less than the column count
    /// when a draw contributes several columns.
    pub s: usize,
    pub columns: usize,
    pub seed: Option<u64>,
    #[serde(rename = "L")]
    pub horizon: Option<usize>,
    pub eta_distribution: Option<EtaDistribution>,
    pub sources: Vec<String>,
    /// Column scale factors.
    pub weights: Vec<f64>,
}

/// Column-stacked, pre-scaled samples serving as a covariance factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: DMatrix<f64>,
    raw: DMatrix<f64>,
    anchors: Vec<DVector<f64>>,
    meta: SampleMeta,
}

impl SnapshotMatrix {
    fn assemble(
        kind: SampleKind,
        n: usize,
        draws: usize,
        columns: Vec<DVector<f64>>,
        weights: Vec<f64>,
        anchors: Vec<DVector<f64>>,
        sources: Vec<String>,
    ) -> Self {
        let raw = DMatrix::from_columns(&columns);
        let mut data = raw.clone();
        for (j, w) in weights.iter().enumerate() {
            data.column_mut(j).scale_mut(*w);
        }
        let meta = SampleMeta {
            kind,
            n,
            s: draws,
            columns: columns.len(),
            seed: None,
            horizon: None,
            eta_distribution: None,
            sources,
            weights,
        };
        Self { data, raw, anchors, meta }
    }

    /// Wraps an already-scaled factor (unit column weights). Gradient
    /// factors built this way get zero anchor states.
    pub fn from_factor(kind: SampleKind, data: DMatrix<f64>) -> Self {
        let n = data.nrows();
        let s = data.ncols();
        let anchors = match kind {
            SampleKind::State => Vec::new(),
            SampleKind::Gradient => vec![DVector::zeros(n); s],
        };
        let meta = SampleMeta {
            kind,
            n,
            s,
            columns: s,
            seed: None,
            horizon: None,
            eta_distribution: None,
            sources: Vec::new(),
            weights: vec![1.0; s],
        };
        Self { raw: data.clone(), data, anchors, meta }
    }

    /// Scaled factor (`X` or `Y`).
    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Unscaled samples, one per column.
    pub fn raw(&self) -> &DMatrix<f64> {
        &self.raw
    }

    pub fn weights(&self) -> &[f64] {
        &self.meta.weights
    }

    /// States at which each gradient column was evaluated (empty for state
    /// matrices).
    pub fn anchors(&self) -> &[DVector<f64>] {
        &self.anchors
    }

    pub fn kind(&self) -> SampleKind {
        self.meta.kind
    }

    pub fn state_dim(&self) -> usize {
        self.meta.n
    }

    pub fn columns(&self) -> usize {
        self.data.ncols()
    }

    pub fn draws(&self) -> usize {
        self.meta.s
    }

    pub fn meta(&self) -> &SampleMeta {
        &self.meta
    }

    /// `data · dataᵀ`; dense `n × n`, for checks on small problems.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.data * self.data.transpose()
    }

    /// Writes `{stem}.csv` (scaled columns), `{stem}.json` (sidecar) and,
    /// for gradients, `{stem}_anchors.csv`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_matrix_csv(&self.data, dir.join(format!("{stem}.csv")))?;
        write_json(&self.meta, dir.join(format!("{stem}.json")))?;
        if self.meta.kind == SampleKind::Gradient {
            write_matrix_csv(&DMatrix::from_columns(&self.anchors), dir.join(format!("{stem}_anchors.csv")))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<Self> {
        let dir = dir.as_ref();
        let data = read_matrix_csv(dir.join(format!("{stem}.csv")))?;
        let meta: SampleMeta = read_json(dir.join(format!("{stem}.json")))?;
        if meta.weights.len() != data.ncols() {
            return Err(Error::DimensionMismatch {
                context: "snapshot weights",
                expected: data.ncols(),
                found: meta.weights.len(),
            });
        }
        let mut raw = data.clone();
        for (j, w) in meta.weights.iter().enumerate() {
            raw.column_mut(j).unscale_mut(*w);
        }
        let anchors = if meta.kind == SampleKind::Gradient {
            let a = read_matrix_csv(dir.join(format!("{stem}_anchors.csv")))?;
            a.column_iter().map(|c| c.into_owned()).collect()
        } else {
            Vec::new()
        };
        Ok(Self { data, raw, anchors, meta })
    }
}

/// The first `count` samples of each trajectory, as `(trajectory, index)`.
pub fn leading_samples(trajectories: &[Trajectory], count: usize) -> Vec<(usize, usize)> {
    trajectories
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..count.min(t.states.len())).map(move |k| (i, k)))
        .collect()
}

/// State covariance factor `X = [x₁ … x_s] / √s` over the selected
/// `(trajectory, index)` samples, centered about the origin or about
/// `reference` when given.
pub fn build_state_matrix(
    trajectories: &[Trajectory],
    selection: &[(usize, usize)],
    reference: Option<&DVector<f64>>,
) -> Result<SnapshotMatrix> {
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    let n = trajectories
        .get(selection[0].0)
        .ok_or(Error::IndexOutOfRange { index: selection[0].0, len: trajectories.len() })?
        .state_dim();
    if let Some(r) = reference {
        if r.len() != n {
            return Err(Error::DimensionMismatch { context: "reference state", expected: n, found: r.len() });
        }
    }
    let mut columns = Vec::with_capacity(selection.len());
    for &(i, k) in selection {
        let traj = trajectories.get(i).ok_or(Error::IndexOutOfRange { index: i, len: trajectories.len() })?;
        let x = traj.states.get(k).ok_or(Error::IndexOutOfRange { index: k, len: traj.states.len() })?;
        if x.len() != n {
            return Err(Error::DimensionMismatch { context: "state sample", expected: n, found: x.len() });
        }
        columns.push(match reference {
            Some(r) => x - r,
            None => x.clone(),
        });
    }
    let s = columns.len();
    let w = 1.0 / (s as f64).sqrt();
    let mut sources: Vec<String> = selection.iter().map(|(i, _)| format!("traj{i}")).collect();
    sources.dedup();
    Ok(SnapshotMatrix::assemble(SampleKind::State, n, s, columns, vec![w; s], Vec::new(), sources))
}

/// Draws `η ∈ ℝ^{m0}` with zero mean and `E[ηηᵀ] = (L+1) I`.
pub fn draw_eta(output_dim: usize, horizon: usize, dist: EtaDistribution, rng: &mut Rng) -> DVector<f64> {
    let scale = ((horizon + 1) as f64).sqrt();
    DVector::from_fn(output_dim, |_, _| {
        let z: f64 = match dist {
            EtaDistribution::Gaussian => rng.sample(StandardNormal),
            EtaDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        scale * z
    })
}

/// Draws `τ` uniformly from `{0, …, L}` and then `η`.
pub fn draw_random_direction(output_dim: usize, horizon: usize, dist: EtaDistribution, rng: &mut Rng) -> RandomDirection {
    let tau = rng.random_range(0..=horizon);
    let eta = draw_eta(output_dim, horizon, dist, rng);
    RandomDirection { tau, eta }
}

/// Solves the adjoint recursion backward from local index `t_f`, returning
/// `g_η(t_f − k, k)` for `k = 0..=k_max`.
pub fn adjoint_gradient_sequence<S: DiscreteSystem + ?Sized>(
    sys: &S,
    traj: &Trajectory,
    t_f: usize,
    eta: &DVector<f64>,
    k_max: usize,
) -> Result<Vec<DVector<f64>>> {
    if t_f >= traj.states.len() {
        return Err(Error::IndexOutOfRange { index: t_f, len: traj.states.len() });
    }
    if k_max > t_f {
        return Err(Error::IndexOutOfRange { index: k_max, len: t_f + 1 });
    }
    if eta.len() != sys.output_dim() {
        return Err(Error::DimensionMismatch { context: "output direction", expected: sys.output_dim(), found: eta.len() });
    }
    let q = sys.input_dim();
    let mut seq = Vec::with_capacity(k_max + 1);
    let mut g = sys.adjoint_output(&traj.states[t_f], &traj.input_at(t_f, q), eta);
    seq.push(g.clone());
    for k in 1..=k_max {
        let t = t_f - k;
        g = sys.adjoint_step(&traj.states[t], &traj.input_at(t, q), &g);
        seq.push(g.clone());
    }
    Ok(seq)
}

struct Draw {
    columns: Vec<DVector<f64>>,
    anchors: Vec<DVector<f64>>,
    scale: f64,
}

fn collect_draws(
    kind_n: usize,
    draws: Vec<Draw>,
    spec: &GradientSampleSpec,
    sources: Vec<String>,
) -> SnapshotMatrix {
    let s_g = draws.len();
    let base = 1.0 / (s_g as f64).sqrt();
    let mut columns = Vec::new();
    let mut anchors = Vec::new();
    let mut weights = Vec::new();
    for d in draws {
        weights.extend(std::iter::repeat_n(d.scale * base, d.columns.len()));
        columns.extend(d.columns);
        anchors.extend(d.anchors);
    }
    let mut m = SnapshotMatrix::assemble(SampleKind::Gradient, kind_n, s_g, columns, weights, anchors, sources);
    m.meta.seed = Some(spec.seed);
    m.meta.horizon = Some(spec.horizon);
    m.meta.eta_distribution = Some(spec.eta);
    m
}

/// Gradient factor from mini-trajectories of exactly `L + 1` states drawn
/// from a statistically stationary distribution.
///
/// Each mini-trajectory contributes all `L + 1` gradients of one adjoint
/// solve from `t_f = L`, scaled by `1/√(L+1)`; blocks are then scaled by
/// `1/√s_g` with `s_g` the number of mini-trajectories.
pub fn sample_gradients_stationary<S: DiscreteSystem + ?Sized>(
    sys: &S,
    minitrajectories: &[Trajectory],
    spec: &GradientSampleSpec,
) -> Result<SnapshotMatrix> {
    let horizon = spec.horizon;
    if minitrajectories.is_empty() {
        return Err(Error::EmptySelection);
    }
    if spec.samples != 0 && spec.samples != minitrajectories.len() {
        return Err(Error::DimensionMismatch {
            context: "mini-trajectory count",
            expected: spec.samples,
            found: minitrajectories.len(),
        });
    }
    for t in minitrajectories {
        if t.states.len() != horizon + 1 {
            return Err(Error::DimensionMismatch { context: "mini-trajectory length", expected: horizon + 1, found: t.states.len() });
        }
    }
    let m0 = sys.output_dim();
    let draws = minitrajectories
        .par_iter()
        .enumerate()
        .map(|(i, traj)| {
            let mut rng = rng::stream(spec.seed, i as u64);
            let eta = draw_eta(m0, horizon, spec.eta, &mut rng);
            let columns = adjoint_gradient_sequence(sys, traj, horizon, &eta, horizon)?;
            let anchors = (0..=horizon).map(|k| traj.states[horizon - k].clone()).collect();
            Ok(Draw { columns, anchors, scale: 1.0 / ((horizon + 1) as f64).sqrt() })
        })
        .collect::<Result<Vec<_>>>()?;
    let sources = (0..minitrajectories.len()).map(|i| format!("traj{i}")).collect();
    Ok(collect_draws(sys.state_dim(), draws, spec, sources))
}

/// One draw of the long-trajectory sampler: the retained gradients
/// `g_η(t_f − k, k)` for `τ_min ≤ k ≤ τ_max` with their state indices, and
/// the block scale `1/√(1 + τ_max − τ_min)`.
#[derive(Debug, Clone)]
pub struct GradientBlock {
    pub columns: Vec<(usize, DVector<f64>)>,
    pub scale: f64,
}

/// Gradients retained for initial index `t′` and offset `τ′` on a
/// trajectory of `N + L + 1` states.
pub fn long_trajectory_block<S: DiscreteSystem + ?Sized>(
    sys: &S,
    traj: &Trajectory,
    horizon: usize,
    t_prime: usize,
    tau_prime: usize,
    eta: &DVector<f64>,
) -> Result<GradientBlock> {
    let n_init = initial_count(traj, horizon)? - 1;
    if t_prime > n_init {
        return Err(Error::IndexOutOfRange { index: t_prime, len: n_init + 1 });
    }
    if tau_prime > horizon {
        return Err(Error::IndexOutOfRange { index: tau_prime, len: horizon + 1 });
    }
    let t_f = t_prime + tau_prime;
    let k_max = horizon.min(t_f);
    let seq = adjoint_gradient_sequence(sys, traj, t_f, eta, k_max)?;
    let tau_min = t_f.saturating_sub(n_init);
    let tau_max = k_max;
    let columns = (tau_min..=tau_max).map(|k| (t_f - k, seq[k].clone())).collect();
    Ok(GradientBlock { columns, scale: 1.0 / ((1 + tau_max - tau_min) as f64).sqrt() })
}

/// `N + 1`, the number of admissible initial indices.
fn initial_count(traj: &Trajectory, horizon: usize) -> Result<usize> {
    if traj.states.len() < horizon + 1 {
        return Err(Error::DimensionMismatch {
            context: "long trajectory length (at least L + 1)",
            expected: horizon + 1,
            found: traj.states.len(),
        });
    }
    Ok(traj.states.len() - horizon)
}

/// Gradient factor from one long trajectory `x(0..=N+L)`: each of the
/// `s_g` draws picks `t′ ∈ {0..N}`, `τ′ ∈ {0..L}` and `η` uniformly and
/// keeps every gradient of the adjoint solve from `t_f = t′ + τ′` whose
/// initial index lies in `{0..N}`.
pub fn sample_gradients_long<S: DiscreteSystem + ?Sized>(
    sys: &S,
    traj: &Trajectory,
    spec: &GradientSampleSpec,
) -> Result<SnapshotMatrix> {
    sample_gradients_long_multi(sys, std::slice::from_ref(traj), spec)
}

/// Long-trajectory sampling over several trajectories. Each draw first
/// picks an initial sample uniformly from the union of all admissible
/// initial indices (trajectory `j` with probability `∝ N_j + 1`), then
/// proceeds as for a single trajectory.
pub fn sample_gradients_long_multi<S: DiscreteSystem + ?Sized>(
    sys: &S,
    trajectories: &[Trajectory],
    spec: &GradientSampleSpec,
) -> Result<SnapshotMatrix> {
    if trajectories.is_empty() || spec.samples == 0 {
        return Err(Error::EmptySelection);
    }
    let horizon = spec.horizon;
    let counts = trajectories
        .iter()
        .map(|t| initial_count(t, horizon))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = counts.iter().sum();
    let m0 = sys.output_dim();
    let draws = (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(spec.seed, i as u64);
            let mut global = rng.random_range(0..total);
            let mut j = 0;
            while global >= counts[j] {
                global -= counts[j];
                j += 1;
            }
            let t_prime = global;
            let tau_prime = rng.random_range(0..=horizon);
            let eta = draw_eta(m0, horizon, spec.eta, &mut rng);
            let block = long_trajectory_block(sys, &trajectories[j], horizon, t_prime, tau_prime, &eta)?;
            let anchors = block.columns.iter().map(|(t, _)| trajectories[j].states[*t].clone()).collect();
            let columns = block.columns.into_iter().map(|(_, g)| g).collect();
            Ok(Draw { columns, anchors, scale: block.scale })
        })
        .collect::<Result<Vec<_>>>()?;
    let sources = (0..trajectories.len()).map(|i| format!("traj{i}")).collect();
    Ok(collect_draws(sys.state_dim(), draws, spec, sources))
}
