//! Cluster-aware conditional tabular GAN with probabilistic class-conditional
//! sampling, plus the evaluation protocols used to judge it.

pub mod autodiff;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod partition;
pub mod sampler;
pub mod trainer;
pub mod transform;

pub use config::TrainConfig;
pub use data::{Dataset, DatasetSchema};
pub use error::{Error, Result};
pub use sampler::SampleConditions;
pub use trainer::{train, FittedModel};
