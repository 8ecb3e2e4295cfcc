//! Task-agnostic policy and multi-head normalized value network.
//!
//! One tanh hidden layer feeds a linear policy head (softmax over the shared
//! action set) and a matrix of value heads, one row per task. Gradients are
//! computed analytically; [`RmsProp`] applies them.

mod loss;
mod network;
mod rmsprop;

pub use loss::{
    batch_loss, compute_gradients, normalized_coefficient, GradientOutput, LossInputs, Sample,
};
pub use network::{
    entropy, log_softmax, softmax, Architecture, Forward, NetworkParams, ParamSet, BLOCK_NAMES,
};
pub use rmsprop::{RmsProp, RmsPropConfig, StepReport};
