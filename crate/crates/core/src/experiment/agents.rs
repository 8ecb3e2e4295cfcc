use crate::config::Variant;
use crate::runtime::AgentConfig;

/// The learner-side switches of each variant.
pub fn make_agent_config(variant: Variant) -> AgentConfig {
    match variant {
        Variant::PopArt => AgentConfig {
            variant,
            per_task_heads: true,
            adaptive_stats: true,
        },
        Variant::MultiHead => AgentConfig {
            variant,
            per_task_heads: true,
            adaptive_stats: false,
        },
        Variant::Baseline => AgentConfig {
            variant,
            per_task_heads: false,
            adaptive_stats: false,
        },
    }
}
