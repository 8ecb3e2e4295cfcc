use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agents::make_agent_config;
use super::scores::ScoreRecord;
use crate::approximator::log_softmax;
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::runtime::{derive_seed, sample_action};
use crate::taskworld::{
    oracle_optimal_return, oracle_random_return, OracleRow, Suite, NUM_ACTIONS,
};
use crate::Params;

/// Episodes behind each random reference unless stated otherwise.
pub const DEFAULT_REFERENCE_EPISODES: usize = 10_000;

/// A task-agnostic policy: it sees observations only.
pub trait Policy {
    fn act(&self, obs: &[f64], rng: &mut dyn RngCore) -> Result<usize>;
}

/// Samples from the network's softmax policy.
pub struct NetworkPolicy<'a>(pub &'a Params);

impl Policy for NetworkPolicy<'_> {
    fn act(&self, obs: &[f64], rng: &mut dyn RngCore) -> Result<usize> {
        let logp = log_softmax(&self.0.forward(obs)?.logits);
        Ok(sample_action(&logp, rng))
    }
}

/// Uniform over all actions.
pub struct UniformPolicy;

impl Policy for UniformPolicy {
    fn act(&self, _: &[f64], rng: &mut dyn RngCore) -> Result<usize> {
        Ok(rng.gen_range(0..NUM_ACTIONS))
    }
}

/// Acts greedily with respect to one task's value-iteration solution,
/// reading the state from the active one-hot index.
pub struct OracleGreedyPolicy {
    greedy: Vec<usize>,
}

impl OracleGreedyPolicy {
    pub fn for_task(suite: &Suite, task: usize) -> Result<Self> {
        let spec = suite.tasks().get(task).ok_or(Error::TaskOutOfRange {
            task,
            tasks: suite.len(),
        })?;
        Ok(Self {
            greedy: oracle_optimal_return(spec)?.greedy_actions,
        })
    }
}

impl Policy for OracleGreedyPolicy {
    fn act(&self, obs: &[f64], _: &mut dyn RngCore) -> Result<usize> {
        obs.iter()
            .position(|&x| x == 1.0)
            .and_then(|state| self.greedy.get(state).copied())
            .ok_or_else(|| Error::Config("observation has no active state".into()))
    }
}

/// Optimal and random references for every task of a suite.
pub fn compute_references(suite: &Suite, episodes: usize, seed: u64) -> Result<Vec<OracleRow>> {
    suite
        .tasks()
        .iter()
        .enumerate()
        .map(|(task, spec)| {
            let random = oracle_random_return(spec, episodes, derive_seed(seed, task as u64))?;
            Ok(OracleRow {
                task_id: task,
                optimal: oracle_optimal_return(spec)?.value,
                random: random.mean,
                stderr: random.stderr,
            })
        })
        .collect()
}

/// Mean discounted return of `policy` on one task, on untransformed rewards.
pub fn mean_return(
    policy: &dyn Policy,
    suite: &Suite,
    task: usize,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let stream = derive_seed(seed, task as u64);
    let mut env = suite.make_env(task, derive_seed(stream, 0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(stream, 1));
    let gamma = env.spec().gamma;
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut obs = env.reset();
        let (mut ret, mut discount) = (0.0, 1.0);
        loop {
            let t = env.step(policy.act(&obs, &mut rng)?)?;
            ret += discount * t.raw_reward;
            discount *= gamma;
            if t.terminated {
                break;
            }
            obs = t.observation;
        }
        total += ret;
    }
    Ok(total / episodes as f64)
}

/// Scores a frozen policy on every task of the suite.
pub fn evaluate(
    policy: &dyn Policy,
    suite: &Suite,
    references: &[OracleRow],
    episodes: usize,
    seed: u64,
) -> Result<Vec<ScoreRecord>> {
    if references.len() != suite.len() {
        return Err(Error::LengthMismatch {
            what: "references",
            expected: suite.len(),
            got: references.len(),
        });
    }
    references
        .iter()
        .enumerate()
        .map(|(task, r)| {
            let raw = mean_return(policy, suite, task, episodes, seed)?;
            ScoreRecord::new(task, raw, r.random, r.optimal)
        })
        .collect()
}

/// Checks that a checkpoint fits a suite, then scores its policy.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    suite: &Suite,
    references: &[OracleRow],
    episodes: usize,
    seed: u64,
) -> Result<Vec<ScoreRecord>> {
    let arch = checkpoint.state.params.arch();
    if arch.obs_dim != suite.obs_dim() {
        return Err(Error::DimensionMismatch {
            expected: suite.obs_dim(),
            got: arch.obs_dim,
        });
    }
    let heads = make_agent_config(checkpoint.variant).head_count(suite.len());
    if arch.heads != heads || checkpoint.state.stats.len() != suite.len() {
        return Err(Error::DimensionMismatch {
            expected: suite.len(),
            got: checkpoint.state.stats.len(),
        });
    }
    evaluate(&NetworkPolicy(&checkpoint.state.params), suite, references, episodes, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::Architecture;
    use crate::taskworld::TaskSpec;

    #[test]
    fn oracle_greedy_scores_one() {
        let suite = Suite::scale6();
        let refs = compute_references(&suite, 500, 1).unwrap();
        for (task, r) in refs.iter().enumerate() {
            let policy = OracleGreedyPolicy::for_task(&suite, task).unwrap();
            let raw = mean_return(&policy, &suite, task, 5, 0).unwrap();
            let score = ScoreRecord::new(task, raw, r.random, r.optimal).unwrap();
            assert!((score.normalized - 1.0).abs() < 1e-12, "{score:?}");
        }
    }

    #[test]
    fn uniform_policy_scores_near_zero() {
        let suite = Suite::new("c", vec![TaskSpec::chain(0, 5, 3.0)]).unwrap();
        let refs = compute_references(&suite, 4000, 7).unwrap();
        let r = evaluate(&UniformPolicy, &suite, &refs, 4000, 99).unwrap()[0];
        let se = refs[0].stderr / (refs[0].optimal - refs[0].random);
        assert!(r.normalized.abs() < 5.0 * se * 2f64.sqrt(), "{r:?}");
    }

    #[test]
    fn zero_episodes_and_mismatches_are_errors() {
        let suite = Suite::scale6();
        let refs = compute_references(&suite, 10, 1).unwrap();
        assert!(evaluate(&UniformPolicy, &suite, &refs, 0, 0).is_err());
        assert!(evaluate(&UniformPolicy, &suite, &refs[..2], 1, 0).is_err());
    }

    #[test]
    fn network_policy_uses_only_observations() {
        let arch = Architecture {
            obs_dim: 16,
            hidden: 4,
            actions: 4,
            heads: 6,
        };
        let p = Params::zeros(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = NetworkPolicy(&p).act(&[0.0; 16], &mut rng).unwrap();
        assert!(a < NUM_ACTIONS);
        assert!(NetworkPolicy(&p).act(&[0.0; 3], &mut rng).is_err());
    }
}
