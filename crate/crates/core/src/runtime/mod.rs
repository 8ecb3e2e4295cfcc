//! Decoupled actor/learner execution.
//!
//! Actors own one environment each and produce fixed-length rollouts from
//! the latest published parameter snapshot. A single learner consumes
//! batches, computes v-trace targets and normalized updates, and publishes
//! the next snapshot. The bounded rollout queue is the only point where the
//! two sides meet.

mod actor;
mod learner;
mod rollout;
mod training;

pub use actor::{actor_loop, derive_seed, sample_action, Actor};
pub use learner::{AgentConfig, Learner, LearnerState, StepMetrics};
pub use rollout::{PushError, Rollout, RolloutQueue, SnapshotCell};
pub use training::{
    assigned_task, initial_state, run_training, NoObserver, Observer, QueueAccounting,
    TrainingOutcome,
};
