//! Reference returns used to normalize scores.
//!
//! All references are computed on the scaled reward *before* the transform,
//! so clipped and unclipped variants of a task share the same references.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvInstance, TaskSpec, NUM_ACTIONS};
use crate::error::{Error, Result};

/// Optimal value from the start state and a greedy action per state.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPlan {
    pub value: f64,
    pub greedy_actions: Vec<usize>,
}

/// Finite-horizon value iteration over `episode_cap` backups. The reward of
/// the `t`-th transition (counting from 0) is discounted by `gamma^t`.
pub fn oracle_optimal_return(spec: &TaskSpec) -> Result<OptimalPlan> {
    spec.validate()?;
    let n = spec.num_states();
    let dist = spec.goal_distances();
    let outcomes: Vec<[(usize, f64, bool); NUM_ACTIONS]> = (0..n)
        .map(|s| {
            std::array::from_fn(|a| {
                let next = spec.next_state(s, a);
                let (base, terminal) = spec.expected_outcome(s, next, &dist);
                (next, spec.reward_scale * base, terminal)
            })
        })
        .collect();

    let mut values = vec![0.0; n];
    let mut greedy = vec![0; n];
    for _ in 0..spec.episode_cap {
        let mut next_values = vec![0.0; n];
        for s in 0..n {
            let mut best = (f64::NEG_INFINITY, 0);
            for (a, &(next, r, terminal)) in outcomes[s].iter().enumerate() {
                let q = r + if terminal { 0.0 } else { spec.gamma * values[next] };
                if q > best.0 + 1e-12 {
                    best = (q, a);
                }
            }
            next_values[s] = best.0;
            greedy[s] = best.1;
        }
        values = next_values;
    }
    Ok(OptimalPlan {
        value: values[spec.start_state()],
        greedy_actions: greedy,
    })
}

/// Monte Carlo estimate of the uniform-random policy's discounted return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub episodes: usize,
}

pub fn oracle_random_return(spec: &TaskSpec, episodes: usize, seed: u64) -> Result<RandomEstimate> {
    if episodes == 0 {
        return Err(Error::Config("random reference needs at least one episode".into()));
    }
    let mut env = EnvInstance::standalone(spec.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_7a4d);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        env.reset();
        let (mut total, mut discount) = (0.0, 1.0);
        loop {
            let t = env.step(rng.gen_range(0..NUM_ACTIONS))?;
            total += discount * t.raw_reward;
            discount *= spec.gamma;
            if t.terminated {
                break;
            }
        }
        returns.push(total);
    }
    let (mean, stderr) = mean_and_stderr(&returns);
    Ok(RandomEstimate {
        mean,
        stderr,
        episodes,
    })
}

pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One line of the oracle cache.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub task_id: usize,
    pub optimal: f64,
    pub random: f64,
    pub stderr: f64,
}

const ORACLE_HEADER: &str = "task_id,optimal,random,stderr";

pub fn write_oracle_csv(path: &Path, rows: &[OracleRow]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "{ORACLE_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.task_id, r.optimal, r.random, r.stderr)?;
    }
    Ok(())
}

pub fn read_oracle_csv(path: &Path) -> Result<Vec<OracleRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(ORACLE_HEADER) {
        return Err(Error::Config(format!("{}: bad oracle header", path.display())));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let bad = || Error::Config(format!("bad oracle row '{line}'"));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            Ok(OracleRow {
                task_id: f[0].trim().parse().map_err(|_| bad())?,
                optimal: num(f[1])?,
                random: num(f[2])?,
                stderr: num(f[3])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskworld::{Sparsity, RIGHT};

    #[test]
    fn chain_optimum_by_hand() {
        let v = oracle_optimal_return(&TaskSpec::chain(0, 3, 10.0)).unwrap();
        // Two moves, reward on the second transition.
        assert!((v.value - 10.0 * 0.99).abs() < 1e-12);
        assert_eq!(v.greedy_actions[0], RIGHT);
        let v = oracle_optimal_return(&TaskSpec::chain(0, 2, 3.5).with_gamma(0.5)).unwrap();
        assert!((v.value - 3.5).abs() < 1e-12);
        let v = oracle_optimal_return(&TaskSpec::chain(0, 8, 0.0)).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn grid_optimum_and_cap() {
        let v = oracle_optimal_return(&TaskSpec::grid(0, 4, 4, 1.0)).unwrap();
        assert!((v.value - 0.99f64.powi(5)).abs() < 1e-12);
        let short = oracle_optimal_return(&TaskSpec::grid(0, 4, 4, 1.0).with_cap(5)).unwrap();
        assert_eq!(short.value, 0.0);
    }

    #[test]
    fn dense_walk_optimum_is_expected_bernoulli_sum() {
        let spec = TaskSpec::dense_walk(0, 3, 2.0).with_cap(10).with_gamma(0.9);
        let v = oracle_optimal_return(&spec).unwrap();
        let expected: f64 = (0..10).map(|t| 2.0 * 0.3 * 0.9f64.powi(t)).sum();
        assert!((v.value - expected).abs() < 1e-12);
    }

    #[test]
    fn dense_chain_optimum_pays_scale_once() {
        let spec = TaskSpec::chain(0, 5, 8.0)
            .with_sparsity(Sparsity::Dense)
            .with_gamma(1.0);
        let v = oracle_optimal_return(&spec).unwrap();
        assert!((v.value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn random_reference_zero_scale_is_exact() {
        let est = oracle_random_return(&TaskSpec::grid(0, 3, 3, 0.0), 50, 1).unwrap();
        assert_eq!((est.mean, est.stderr), (0.0, 0.0));
        assert!(oracle_random_return(&TaskSpec::chain(0, 3, 1.0), 0, 1).is_err());
    }

    #[test]
    fn oracle_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("oracle.csv");
        let rows = vec![
            OracleRow {
                task_id: 0,
                optimal: 9.9,
                random: 0.125,
                stderr: 1e-3,
            },
            OracleRow {
                task_id: 1,
                optimal: 0.1 + 0.2,
                random: -0.0,
                stderr: 0.0,
            },
        ];
        write_oracle_csv(&path, &rows).unwrap();
        assert_eq!(read_oracle_csv(&path).unwrap(), rows);
    }
}
