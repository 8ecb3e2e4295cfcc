use log::warn;

use super::rollout::Rollout;
use crate::approximator::{
    compute_gradients, log_softmax, normalized_coefficient, Architecture, LossInputs, Sample,
};
use crate::config::{Hyperparams, Variant};
use crate::error::{Error, Result};
use crate::normalizer::preserve_outputs_in_place;
use crate::returns::{compute_vtrace, VTraceInputs};
use crate::taskworld::NUM_ACTIONS;
use crate::{NormStats, Optimizer, OptimizerConfig, Params, TaskStats};

/// What distinguishes the agent variants inside the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentConfig {
    pub variant: Variant,
    /// One value head per task rather than a single shared head.
    pub per_task_heads: bool,
    /// Statistics track the value targets; otherwise frozen at the identity.
    pub adaptive_stats: bool,
}

impl AgentConfig {
    pub fn head_count(&self, tasks: usize) -> usize {
        if self.per_task_heads {
            tasks
        } else {
            1
        }
    }

    pub fn head_for(&self, task: usize) -> usize {
        if self.per_task_heads {
            task
        } else {
            0
        }
    }
}

/// Everything the learner owns: parameters, statistics and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub params: Params,
    pub stats: TaskStats,
    pub optimizer: Optimizer,
}

impl LearnerState {
    pub fn new(params: Params, tasks: usize, hyper: &Hyperparams) -> Self {
        let template = NormStats::new(hyper.beta, hyper.sigma_lo, hyper.sigma_hi);
        Self {
            optimizer: Optimizer::new(&params),
            stats: TaskStats::new(tasks, template),
            params,
        }
    }

    pub fn init<R: rand::Rng + ?Sized>(
        agent: &AgentConfig,
        obs_dim: usize,
        hidden: usize,
        tasks: usize,
        hyper: &Hyperparams,
        rng: &mut R,
    ) -> Self {
        let arch = Architecture {
            obs_dim,
            hidden,
            actions: NUM_ACTIONS,
            heads: agent.head_count(tasks),
        };
        Self::new(Params::init(arch, rng), tasks, hyper)
    }
}

/// One row of the metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub frames_total: u64,
    /// Mean undiscounted return of episodes finished in this batch, per task.
    pub episode_return_mean: Vec<Option<f64>>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub queue_depth: usize,
    /// Mean version gap between the learner and the batch's snapshots.
    pub staleness: f64,
    pub saturated_ratios: usize,
    /// The update was not applied because of a non-finite loss or gradient.
    pub skipped: bool,
}

/// The single consumer of rollouts and sole mutator of parameters and statistics.
#[derive(Debug, Clone)]
pub struct Learner {
    pub state: LearnerState,
    pub agent: AgentConfig,
    pub hyper: Hyperparams,
    steps: u64,
    frames: u64,
}

impl Learner {
    pub fn new(state: LearnerState, agent: AgentConfig, hyper: Hyperparams) -> Self {
        Self {
            state,
            agent,
            hyper,
            steps: 0,
            frames: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn params(&self) -> &Params {
        &self.state.params
    }

    fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            learning_rate: self.hyper.learning_rate,
            decay: self.hyper.rmsprop_decay,
            epsilon: self.hyper.rmsprop_epsilon,
            max_grad_norm: self.hyper.max_grad_norm,
        }
    }

    /// Consumes one batch: v-trace targets and normalized losses, one
    /// optimizer update, then per-rollout statistics updates, then output
    /// preservation on every head whose statistics moved.
    pub fn step(&mut self, batch: &[Rollout], queue_depth: usize) -> Result<StepMetrics> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let tasks = self.state.stats.len();
        let params = &self.state.params;
        let learner_version = params.version;

        let mut targets: Vec<Vec<f64>> = Vec::with_capacity(batch.len());
        let mut samples: Vec<Sample<'_, f64>> = Vec::new();
        let mut saturated_ratios = 0;
        let mut staleness = 0.0;
        for r in batch {
            if r.task_id >= tasks {
                return Err(Error::TaskOutOfRange {
                    task: r.task_id,
                    tasks,
                });
            }
            let n = r.len();
            if r.observations.len() != n + 1 {
                return Err(Error::LengthMismatch {
                    what: "rollout observations",
                    expected: n + 1,
                    got: r.observations.len(),
                });
            }
            staleness += learner_version.abs_diff(r.params_version) as f64;
            let stats = *self.state.stats.get(r.task_id)?;
            let head = self.agent.head_for(r.task_id);

            let mut normalized = Vec::with_capacity(n + 1);
            let mut target_logp = Vec::with_capacity(n);
            for (k, obs) in r.observations.iter().enumerate() {
                let fwd = params.forward(obs)?;
                normalized.push(fwd.values[head]);
                if k < n {
                    target_logp.push(log_softmax(&fwd.logits)[r.actions[k]]);
                }
            }
            let values: Vec<f64> = normalized.iter().map(|&v| stats.denormalize(v)).collect();
            let out = compute_vtrace(&VTraceInputs {
                rewards: &r.rewards,
                values: &values,
                target_logp: &target_logp,
                behavior_logp: &r.behavior_logp,
                discounts: &r.discounts,
            })?;
            saturated_ratios += out.saturated_ratios;
            for k in 0..n {
                samples.push(Sample {
                    obs: &r.observations[k],
                    action: r.actions[k],
                    head,
                    value_target: stats.normalize(out.vtrace_returns[k]),
                    advantage: normalized_coefficient(out.policy_targets[k], &stats, normalized[k]),
                });
            }
            targets.push(out.vtrace_returns);
        }
        staleness /= batch.len() as f64;

        let loss = compute_gradients(
            params,
            &LossInputs {
                samples,
                entropy_cost: self.hyper.entropy_cost,
                baseline_cost: self.hyper.baseline_cost,
            },
        )?;

        let batch_frames: u64 = batch.iter().map(|r| r.len() as u64).sum();
        self.frames += batch_frames;
        self.steps += 1;

        let mut skipped = !loss.total_loss.is_finite();
        let mut grad_norm = loss.grads.global_norm();
        if skipped {
            warn!("step {}: non-finite loss, update skipped", self.steps);
        } else {
            let cfg = self.optimizer_config();
            match self.state.optimizer.step(&mut self.state.params, &loss.grads, &cfg) {
                Ok(report) => grad_norm = report.grad_norm,
                Err(Error::NonFiniteGradient) => {
                    warn!("step {}: non-finite gradient, update skipped", self.steps);
                    skipped = true;
                }
                Err(e) => return Err(e),
            }
        }

        if self.agent.adaptive_stats && !skipped {
            self.update_statistics(batch, &targets)?;
        }

        Ok(self.metrics(batch, batch_frames, &loss, grad_norm, queue_depth, staleness, saturated_ratios, skipped))
    }

    fn update_statistics(&mut self, batch: &[Rollout], targets: &[Vec<f64>]) -> Result<()> {
        let before = self.state.stats.clone();
        for (r, g) in batch.iter().zip(targets) {
            let updated = self.state.stats.get(r.task_id)?.update_from_rollout(g)?;
            self.state.stats.set(r.task_id, updated)?;
        }
        let hidden = self.state.params.arch().hidden;
        let w = &mut self.state.params.weights;
        for task in 0..self.state.stats.len() {
            let (old, new) = (before.get(task)?, self.state.stats.get(task)?);
            if old == new {
                continue;
            }
            let head = self.agent.head_for(task);
            let row = &mut w.value_w[head * hidden..(head + 1) * hidden];
            w.value_b[head] = preserve_outputs_in_place(row, w.value_b[head], old, new);
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn metrics(
        &self,
        batch: &[Rollout],
        batch_frames: u64,
        loss: &crate::approximator::GradientOutput<f64>,
        grad_norm: f64,
        queue_depth: usize,
        staleness: f64,
        saturated_ratios: usize,
        skipped: bool,
    ) -> StepMetrics {
        let tasks = self.state.stats.len();
        let mut sums = vec![(0.0, 0usize); tasks];
        for r in batch {
            for &ret in &r.episode_returns {
                sums[r.task_id].0 += ret;
                sums[r.task_id].1 += 1;
            }
        }
        let _ = batch_frames;
        StepMetrics {
            step: self.steps,
            frames_total: self.frames,
            episode_return_mean: sums
                .iter()
                .map(|&(s, c)| (c > 0).then(|| s / c as f64))
                .collect(),
            mu: self.state.stats.iter().map(|s| s.mu).collect(),
            sigma: self.state.stats.iter().map(|s| s.sigma()).collect(),
            policy_loss: loss.policy_loss,
            value_loss: loss.value_loss,
            entropy: loss.entropy,
            grad_norm,
            queue_depth,
            staleness,
            saturated_ratios,
            skipped,
        }
    }
}
