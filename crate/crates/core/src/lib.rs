//! Fairness-aware network revenue management: primal-dual pricing with
//! optimistic demand learning, the fluid benchmark, and an experiment
//! harness.

pub mod benchmark;
pub mod dual;
pub mod ellipsoid;
pub mod env;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod policy;
pub mod primal;
pub mod regularizers;

pub use dual::{DualConfig, DualState};
pub use env::{Instance, InventoryState, ModelParams, NoiseSpec};
pub use error::{Error, Result};
pub use estimator::EstimatorState;
pub use policy::{run_episode, Mode, PolicyConfig, SafetyReport, TrajectoryRecord};
pub use primal::BoxQp;
pub use regularizers::{Regularizer, RegularizerMeta};
