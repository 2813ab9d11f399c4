//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use cobras::kernel::KernelSpec;
use cobras::rom::CvConfig;
use cobras::sampling::EtaDistribution;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, BenchResult};
use crate::results::OutputFormat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemConfig {
    /// Three-state quadratic toy model, RK4-discretized.
    Toy { substeps: usize },
    /// Feed-forward chain with cubic damping (`cubic = 0` makes it linear).
    Chain { n: usize, decay: f64, gain: f64, cubic: f64, sensors: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Gradient sampling and anything else used to fit models.
    pub training: u64,
    /// Test-set draws.
    pub test: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    /// Impulse magnitudes `u₀`; trajectory `i` starts from `u₀ᵢ · b`.
    pub impulses: Vec<f64>,
    /// State samples taken from the start of each trajectory.
    pub state_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    /// Number of random impulse responses.
    pub count: usize,
    pub u0_min: f64,
    pub u0_max: f64,
    /// Steps per impulse response.
    pub steps: usize,
    /// Steps of the `u(t) = sin(t)` run from rest (0 disables it).
    pub sine_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpodConfig {
    pub horizon: usize,
    pub output_rank: usize,
    /// Rest-state mini-trajectories for the stationary-sampling comparison
    /// run on linear chains.
    #[serde(default = "default_stationary_samples")]
    pub stationary_samples: usize,
}

fn default_stationary_samples() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnedConfig {
    /// Nonlinear feature dimension `r`.
    pub features: usize,
    /// Linear coordinates reconstructed from the features, `R ≥ r`.
    pub linear: usize,
    pub cv: CvConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    /// Sampling interval.
    pub dt: f64,
    /// Gradient horizon `L`.
    pub horizon: usize,
    /// Gradient draws `s_g`.
    pub gradient_samples: usize,
    #[serde(default)]
    pub eta: EtaDistribution,
    /// Reduced dimensions for projection-based ROMs.
    pub ranks: Vec<usize>,
    pub kernel: KernelSpec,
    pub seeds: Seeds,
    pub training: TrainingConfig,
    pub test: TestConfig,
    pub bpod: BpodConfig,
    pub learned: Option<LearnedConfig>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub output_format: OutputFormat,
}

impl ExperimentConfig {
    /// Toy-model study: two impulse responses (`u₀ = 0.5, 1`) sampled every
    /// 0.5 time units, 11 samples each, horizon 5, two-dimensional ROMs.
    pub fn toy_default() -> Self {
        Self {
            system: SystemConfig::Toy { substeps: 50 },
            dt: 0.5,
            horizon: 5,
            gradient_samples: 1000,
            eta: EtaDistribution::Gaussian,
            ranks: vec![2],
            kernel: KernelSpec::Gaussian { sigma: 1.0 },
            seeds: Seeds { training: 1, test: 2 },
            training: TrainingConfig { impulses: vec![0.5, 1.0], state_samples: 11 },
            test: TestConfig { count: 100, u0_min: 0.0, u0_max: 1.0, steps: 20, sine_steps: 40 },
            bpod: BpodConfig { horizon: 200, output_rank: 1, stationary_samples: 16 },
            learned: None,
            output_dir: PathBuf::from("results/toy"),
            output_format: OutputFormat::Csv,
        }
    }

    /// Convective-chain comparison: 50 cells where disturbances grow about
    /// twentyfold while crossing the domain, mildly nonlinear damping and learned kernel ROMs with `r = 5`, `R = 20`.
    pub fn surrogate_default() -> Self {
        Self {
            system: SystemConfig::Chain { n: 50, decay: 0.2, gain: 0.85, cubic: 0.05, sensors: 5 },
            dt: 1.0,
            horizon: 60,
            gradient_samples: 300,
            eta: EtaDistribution::Gaussian,
            ranks: vec![4, 8],
            kernel: KernelSpec::Gaussian { sigma: 2.0 },
            seeds: Seeds { training: 1, test: 2 },
            training: TrainingConfig { impulses: vec![0.25, 0.5, 0.75, 1.0], state_samples: 60 },
            test: TestConfig { count: 20, u0_min: 0.0, u0_max: 1.0, steps: 100, sine_steps: 100 },
            bpod: BpodConfig { horizon: 300, output_rank: 1, stationary_samples: 16 },
            learned: Some(LearnedConfig { features: 5, linear: 20, cv: CvConfig::default() }),
            output_dir: PathBuf::from("results/surrogate"),
            output_format: OutputFormat::Csv,
        }
    }

    /// [`surrogate_default`](Self::surrogate_default) without the cubic
    /// term, so the chain is linear and BPOD is exact balanced truncation
    /// up to the finite horizon.
    pub fn surrogate_lti_default() -> Self {
        let mut cfg = Self::surrogate_default();
        if let SystemConfig::Chain { cubic, .. } = &mut cfg.system {
            *cubic = 0.0;
        }
        cfg.output_dir = PathBuf::from("results/surrogate-lti");
        cfg
    }

    pub fn from_toml_str(text: &str) -> BenchResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> BenchResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> BenchResult<()> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if self.ranks.contains(&0) {
            return fail("ranks must be positive".into());
        }
        if self.training.impulses.is_empty() || self.training.state_samples == 0 {
            return fail("training needs at least one impulse and one state sample".into());
        }
        if self.gradient_samples == 0 || self.bpod.stationary_samples == 0 {
            return fail("gradient_samples and bpod.stationary_samples must be positive".into());
        }
        if self.test.u0_min > self.test.u0_max {
            return fail("test.u0_min exceeds test.u0_max".into());
        }
        self.kernel.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        match self.system {
            SystemConfig::Toy { substeps: 0 } => return fail("substeps must be at least 1".into()),
            SystemConfig::Chain { n, sensors, .. } if !(50..=500).contains(&n) || sensors == 0 || sensors > n => {
                return fail(format!("chain size {n} outside the supported range 50..=500 or bad sensor count"));
            }
            _ => {}
        }
        if let Some(l) = &self.learned {
            if l.features == 0 || l.linear < l.features {
                return fail("learned.linear must be at least learned.features > 0".into());
            }
        }
        Ok(())
    }
}
