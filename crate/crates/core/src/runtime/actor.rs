use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rollout::{PushError, Rollout, RolloutQueue, SnapshotCell};
use crate::approximator::log_softmax;
use crate::error::Result;
use crate::taskworld::{EnvInstance, Suite};
use crate::Params;

/// Mixes a run seed with a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Samples an index from log-probabilities using one uniform draw.
pub fn sample_action<R: Rng + ?Sized>(logp: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return a;
        }
    }
    // Rounding left a sliver above the cumulative sum.
    logp.iter()
        .enumerate()
        .rev()
        .find(|(_, lp)| lp.is_finite())
        .map_or(0, |(a, _)| a)
}

/// An actor bound permanently to one environment.
#[derive(Debug)]
pub struct Actor {
    pub id: usize,
    pub task_id: usize,
    env: EnvInstance,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    episode_return: f64,
}

impl Actor {
    pub fn new(id: usize, task_id: usize, suite: &Suite, seed: u64) -> Result<Self> {
        let mut env = suite.make_env(task_id, derive_seed(seed, 2 * id as u64))?;
        let obs = env.reset();
        Ok(Self {
            id,
            task_id,
            env,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 2 * id as u64 + 1)),
            obs,
            episode_return: 0.0,
        })
    }

    /// Generates `n` transitions with `params`. Episodes continue across
    /// rollout boundaries. Returns `None`, discarding the partial rollout,
    /// if `should_stop` becomes true before the rollout is complete.
    pub fn generate(
        &mut self,
        params: &Params,
        n: usize,
        should_stop: &dyn Fn() -> bool,
    ) -> Result<Option<Rollout>> {
        let mut r = Rollout {
            task_id: self.task_id,
            actor_id: self.id,
            params_version: params.version,
            observations: Vec::with_capacity(n + 1),
            actions: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            behavior_logp: Vec::with_capacity(n),
            discounts: Vec::with_capacity(n),
            episode_returns: Vec::new(),
        };
        let gamma = self.env.spec().gamma;
        for _ in 0..n {
            if should_stop() {
                return Ok(None);
            }
            let logp = log_softmax(&params.forward(&self.obs)?.logits);
            let action = sample_action(&logp, &mut self.rng);
            let t = self.env.step(action)?;
            r.observations.push(std::mem::replace(&mut self.obs, t.observation));
            r.actions.push(action);
            r.rewards.push(t.reward);
            r.behavior_logp.push(logp[action]);
            self.episode_return += t.raw_reward;
            if t.terminated {
                r.discounts.push(0.0);
                r.episode_returns.push(self.episode_return);
                self.episode_return = 0.0;
                self.obs = self.env.reset();
            } else {
                r.discounts.push(gamma);
            }
        }
        r.observations.push(self.obs.clone());
        Ok(Some(r))
    }
}

/// Actor thread body: fetch the latest snapshot, produce a rollout, enqueue
/// it; repeat until the queue is closed.
pub fn actor_loop(mut actor: Actor, snapshots: &SnapshotCell, queue: &RolloutQueue, n: usize) -> Result<()> {
    loop {
        if queue.is_closed() {
            return Ok(());
        }
        let params = snapshots.latest();
        let Some(rollout) = actor.generate(&params, n, &|| queue.is_closed())? else {
            return Ok(());
        };
        match queue.push(rollout) {
            Ok(()) => {}
            Err(PushError::Closed(_)) | Err(PushError::Full(_)) => return Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::Architecture;
    use crate::taskworld::{TaskSpec, RIGHT};

    fn suite() -> Suite {
        Suite::new("t", vec![TaskSpec::chain(0, 4, 1.0).with_cap(5)]).unwrap()
    }

    fn params(suite: &Suite) -> Params {
        Params::zeros(Architecture {
            obs_dim: suite.obs_dim(),
            hidden: 3,
            actions: 4,
            heads: 1,
        })
    }

    #[test]
    fn dominant_logit_forces_actions() {
        let s = suite();
        let mut p = params(&s);
        p.weights.policy_b[RIGHT] = 1e3;
        let mut actor = Actor::new(0, 0, &s, 1).unwrap();
        let r = actor.generate(&p, 7, &|| false).unwrap().unwrap();
        assert!(r.actions.iter().all(|&a| a == RIGHT));
        assert!(r.behavior_logp.iter().all(|&lp| lp == 0.0));
        // Goal after three moves, then a fresh episode.
        assert_eq!(r.discounts[2], 0.0);
        assert_eq!(r.discounts[5], 0.0);
        assert_eq!(r.episode_returns, vec![1.0, 1.0]);
        assert_eq!(r.observations.len(), 8);
        assert_eq!(r.observations[3], r.observations[0]);
    }

    #[test]
    fn behavior_logp_replays() {
        let s = suite();
        let mut p = params(&s);
        p.weights.policy_w = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        p.weights.trunk_w = (0..12).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut actor = Actor::new(3, 0, &s, 9).unwrap();
        let r = actor.generate(&p, 20, &|| false).unwrap().unwrap();
        for k in 0..r.len() {
            let lp = log_softmax(&p.forward(&r.observations[k]).unwrap().logits)[r.actions[k]];
            assert!((lp - r.behavior_logp[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn stop_discards_partial_rollout() {
        let s = suite();
        let p = params(&s);
        let mut actor = Actor::new(0, 0, &s, 1).unwrap();
        let calls = std::cell::Cell::new(0);
        let stop = || {
            calls.set(calls.get() + 1);
            calls.get() > 3
        };
        assert!(actor.generate(&p, 10, &stop).unwrap().is_none());
    }

    #[test]
    fn sampling_follows_probabilities() {
        let logp: Vec<f64> = [0.1f64, 0.2, 0.3, 0.4].iter().map(|p| p.ln()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[sample_action(&logp, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            let freq = *c as f64 / 40_000.0;
            assert!((freq - p).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn seeds_differ_per_stream() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
