//! Trajectory-length curriculum imitation learning for distributed
//! multi-robot policies.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the file formats and the CLI use.

pub mod autodiff;
pub mod cli;
pub mod curriculum;
pub mod dataset;
pub mod error;
pub mod experts;
pub mod io;
pub mod metrics;
pub mod perception;
pub mod policy;
pub mod rollout;
pub mod scalar;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Tensor = autodiff::Tensor<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type AdamState = autodiff::AdamState<f64>;
pub type SwarmState = world::SwarmState<f64>;
pub type WorldSpec = world::WorldSpec<f64>;
pub type Trajectory = world::Trajectory<f64>;
pub type Dataset = dataset::Dataset<f64>;
pub type PolicyParams = policy::PolicyParams<f64>;
pub type GenerationConfig = experts::GenerationConfig<f64>;
pub type TrainConfig = trainer::TrainConfig<f64>;
pub type Checkpoint = trainer::Checkpoint<f64>;
pub type MetricsReport = trainer::MetricsReport<f64>;
