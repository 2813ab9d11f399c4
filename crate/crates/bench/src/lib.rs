//! Experiment driver for the `cobras` model-reduction toolkit: configs,
//! the toy-model study, a desk-scale surrogate comparison and result
//! manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod results;
pub mod surrogate;
pub mod system;
pub mod toy;

pub use config::ExperimentConfig;
pub use error::{BenchError, BenchResult};
pub use results::{emit_results, ExperimentResults, OutputFormat, ResultManifest};
pub use surrogate::run_surrogate_experiment;
pub use toy::run_toy_experiment;
