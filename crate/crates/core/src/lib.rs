//! Multi-task actor-critic learning with adaptive return normalization.
//!
//! The numeric core ([`normalizer`], [`returns`], [`approximator`]) is generic
//! over the floating point type; the aliases below pin it to `f64`, which is
//! what the runtime and experiments use.

pub mod approximator;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod normalizer;
pub mod returns;
pub mod runtime;
pub mod scalar;
pub mod taskworld;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type of the runtime.
pub type Real = f64;

pub type NormStats = normalizer::NormStats<Real>;
pub type TaskStats = normalizer::TaskStatsVector<Real>;
pub type Params = approximator::NetworkParams<Real>;
pub type Grads = approximator::ParamSet<Real>;
pub type Optimizer = approximator::RmsProp<Real>;
pub type OptimizerConfig = approximator::RmsPropConfig<Real>;

pub type NormStatsF32 = normalizer::NormStats<f32>;
pub type ParamsF32 = approximator::NetworkParams<f32>;
