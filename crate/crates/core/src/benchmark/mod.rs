//! Fluid benchmark, regret metrics and the experiment harness.

pub mod config;
pub mod csv_io;
pub mod experiment;
pub mod fluid;
pub mod metrics;

pub use config::{ExperimentConfig, RegularizerSpec};
pub use csv_io::{ExperimentRow, Trial};
pub use experiment::{run_experiment, run_experiment_to_csv, ExperimentOutput};
pub use fluid::{solve_fluid, FluidSolution};
pub use metrics::{episode_metrics, regret_of, EpisodeMetrics};
