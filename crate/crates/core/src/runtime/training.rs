use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::Duration;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::actor::{actor_loop, derive_seed, Actor};
use super::learner::{AgentConfig, Learner, LearnerState, StepMetrics};
use super::rollout::{Rollout, RolloutQueue, SnapshotCell};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::taskworld::Suite;

/// Called after every learner step. Returning an error stops the run.
pub trait Observer {
    fn on_step(&mut self, metrics: &StepMetrics, learner: &Learner) -> Result<()>;
}

impl<F: FnMut(&StepMetrics, &Learner) -> Result<()>> Observer for F {
    fn on_step(&mut self, metrics: &StepMetrics, learner: &Learner) -> Result<()> {
        self(metrics, learner)
    }
}

/// An observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {
    fn on_step(&mut self, _: &StepMetrics, _: &Learner) -> Result<()> {
        Ok(())
    }
}

/// Rollout accounting at shutdown. `enqueued == consumed + discarded`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueAccounting {
    pub enqueued: u64,
    pub consumed: u64,
    pub discarded: u64,
}

#[derive(Debug)]
pub struct TrainingOutcome {
    pub learner: Learner,
    pub accounting: QueueAccounting,
}

/// Task served by actor `id` under round-robin assignment.
pub fn assigned_task(id: usize, tasks: usize) -> usize {
    id % tasks
}

/// Builds the initial learner state for `cfg`, seeded from the run seed.
pub fn initial_state(cfg: &RunConfig, suite: &Suite, agent: &AgentConfig) -> LearnerState {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, u64::MAX));
    LearnerState::init(agent, suite.obs_dim(), cfg.hidden, suite.len(), &cfg.hyper, &mut rng)
}

fn check_state(state: &LearnerState, suite: &Suite, agent: &AgentConfig) -> Result<()> {
    let arch = state.params.arch();
    if arch.obs_dim != suite.obs_dim() {
        return Err(Error::DimensionMismatch {
            expected: suite.obs_dim(),
            got: arch.obs_dim,
        });
    }
    if arch.heads != agent.head_count(suite.len()) {
        return Err(Error::DimensionMismatch {
            expected: agent.head_count(suite.len()),
            got: arch.heads,
        });
    }
    if state.stats.len() != suite.len() {
        return Err(Error::LengthMismatch {
            what: "task statistics",
            expected: suite.len(),
            got: state.stats.len(),
        });
    }
    Ok(())
}

/// Trains until the learner has consumed at least `cfg.frames` environment
/// frames, summed across tasks. `init` resumes from an existing state.
pub fn run_training(
    cfg: &RunConfig,
    suite: &Suite,
    agent: AgentConfig,
    init: Option<LearnerState>,
    observer: &mut dyn Observer,
) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let state = match init {
        Some(state) => state,
        None => initial_state(cfg, suite, &agent),
    };
    check_state(&state, suite, &agent)?;
    let learner = Learner::new(state, agent, cfg.hyper);
    let actors = (0..cfg.actor_count(suite.len()))
        .map(|id| Actor::new(id, assigned_task(id, suite.len()), suite, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    info!(
        "training {} on {} ({} tasks, {} actors, {} mode) for {} frames",
        agent.variant,
        suite.name,
        suite.len(),
        actors.len(),
        cfg.mode,
        cfg.frames
    );
    match cfg.mode {
        Mode::Synchronous => run_synchronous(cfg, learner, actors, observer),
        Mode::FreeRunning => run_free(cfg, learner, actors, observer),
    }
}

/// Actors and learner alternate on one thread. Every rollout is generated
/// with the learner's current parameters, so staleness is zero and the run
/// is a pure function of the configuration.
fn run_synchronous(
    cfg: &RunConfig,
    mut learner: Learner,
    mut actors: Vec<Actor>,
    observer: &mut dyn Observer,
) -> Result<TrainingOutcome> {
    let mut next_actor = 0;
    let mut accounting = QueueAccounting::default();
    let never = || false;
    while learner.frames() < cfg.frames {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let count = actors.len();
            let rollout = actors[next_actor]
                .generate(learner.params(), cfg.rollout_len, &never)?
                .expect("never stopped");
            next_actor = (next_actor + 1) % count;
            batch.push(rollout);
        }
        accounting.enqueued += batch.len() as u64;
        accounting.consumed += batch.len() as u64;
        let metrics = learner.step(&batch, 0)?;
        observer.on_step(&metrics, &learner)?;
    }
    Ok(TrainingOutcome {
        learner,
        accounting,
    })
}

/// One thread per actor feeding a bounded queue; the learner runs on the
/// calling thread and publishes a fresh snapshot after every step.
fn run_free(
    cfg: &RunConfig,
    mut learner: Learner,
    actors: Vec<Actor>,
    observer: &mut dyn Observer,
) -> Result<TrainingOutcome> {
    let queue = RolloutQueue::new(cfg.queue_capacity(actors.len()));
    let snapshots = SnapshotCell::new(learner.params().clone());
    let failed = AtomicBool::new(false);
    let mut consumed = 0u64;
    let mut abandoned = 0u64;

    let result = thread::scope(|scope| {
        let handles: Vec<_> = actors
            .into_iter()
            .map(|actor| {
                let (queue, snapshots, failed) = (&queue, &snapshots, &failed);
                scope.spawn(move || {
                    let out = actor_loop(actor, snapshots, queue, cfg.rollout_len);
                    if out.is_err() {
                        failed.store(true, Ordering::SeqCst);
                        queue.close();
                    }
                    out
                })
            })
            .collect();

        let learn = (|| -> Result<()> {
            while learner.frames() < cfg.frames {
                let mut batch: Vec<Rollout> = Vec::with_capacity(cfg.batch_size);
                while batch.len() < cfg.batch_size {
                    if failed.load(Ordering::SeqCst) {
                        abandoned = batch.len() as u64;
                        return Ok(());
                    }
                    if let Some(r) = queue.pop_timeout(Duration::from_millis(20)) {
                        batch.push(r);
                    }
                }
                consumed += batch.len() as u64;
                let metrics = learner.step(&batch, queue.len())?;
                snapshots.publish(learner.params().clone());
                observer.on_step(&metrics, &learner)?;
            }
            Ok(())
        })();
        queue.close();
        let mut actor_result = Ok(());
        for h in handles {
            let r = h.join().expect("actor thread panicked");
            if actor_result.is_ok() {
                actor_result = r;
            }
        }
        learn.and(actor_result)
    });

    let discarded = queue.drain().len() as u64 + abandoned;
    let accounting = QueueAccounting {
        enqueued: queue.enqueued(),
        consumed,
        discarded,
    };
    debug!("queue accounting {accounting:?}");
    result?;
    Ok(TrainingOutcome {
        learner,
        accounting,
    })
}
