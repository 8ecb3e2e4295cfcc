//! Scoring, evaluation of frozen policies, agent variants and
//! population-based training.

mod agents;
mod evaluate;
mod pbt;
pub mod results;
mod scores;

pub use agents::make_agent_config;
pub use evaluate::{
    compute_references, evaluate, evaluate_checkpoint, mean_return, NetworkPolicy,
    OracleGreedyPolicy, Policy, UniformPolicy, DEFAULT_REFERENCE_EPISODES,
};
pub use pbt::{
    pbt_step, run_pbt, sample_hyperparams, within_supports, FitnessRow, PbtMember, PbtOutcome,
    PbtSettings,
};
pub use scores::{aggregate, capped, normalized_score, Aggregate, ScoreRecord};
