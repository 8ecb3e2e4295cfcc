//! Actor-critic loss in normalized units and its analytic gradient.
//!
//! Per sample the loss is
//! `-coef * log pi(a|s) + baseline_cost * 0.5 * (target - n_head(s))^2 - entropy_cost * H(pi(.|s))`
//! with `coef` held constant. The batch loss is the mean over samples.

use super::network::{log_softmax, NetworkParams, ParamSet};
use crate::error::{Error, Result};
use crate::normalizer::NormStats;
use crate::scalar::Scalar;

/// One training example.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, T> {
    pub obs: &'a [T],
    pub action: usize,
    /// Value head trained by this sample.
    pub head: usize,
    /// `(G^v - mu) / sigma`
    pub value_target: T,
    /// `(G^pi - mu) / sigma - n_head(s)`
    pub advantage: T,
}

#[derive(Debug, Clone)]
pub struct LossInputs<'a, T> {
    pub samples: Vec<Sample<'a, T>>,
    pub entropy_cost: T,
    pub baseline_cost: T,
}

#[derive(Debug, Clone)]
pub struct GradientOutput<T> {
    pub grads: ParamSet<T>,
    /// Batch means of the loss components.
    pub policy_loss: T,
    pub value_loss: T,
    pub entropy: T,
    pub total_loss: T,
}

/// Normalized policy-gradient coefficient `(g_pi - mu) / sigma - n_value`.
pub fn normalized_coefficient<T: Scalar>(g_pi: T, stats: &NormStats<T>, n_value: T) -> T {
    stats.normalize(g_pi) - n_value
}

/// Mean loss over the batch, without gradients.
pub fn batch_loss<T: Scalar>(params: &NetworkParams<T>, batch: &LossInputs<'_, T>) -> Result<T> {
    Ok(compute_gradients(params, batch)?.total_loss)
}

pub fn compute_gradients<T: Scalar>(
    params: &NetworkParams<T>,
    batch: &LossInputs<'_, T>,
) -> Result<GradientOutput<T>> {
    if batch.samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let arch = params.arch();
    let w = &params.weights;
    let mut grads = ParamSet::zeros(arch);
    let (mut policy_loss, mut value_loss, mut entropy_sum) = (T::zero(), T::zero(), T::zero());
    let inv_m = T::one() / T::lit(batch.samples.len() as f64);
    let half = T::lit(0.5);

    let mut d_logits = vec![T::zero(); arch.actions];
    let mut d_hidden = vec![T::zero(); arch.hidden];

    for s in &batch.samples {
        if s.head >= arch.heads {
            return Err(Error::TaskOutOfRange {
                task: s.head,
                tasks: arch.heads,
            });
        }
        if s.action >= arch.actions {
            return Err(Error::InvalidAction(s.action));
        }
        let fwd = params.forward(s.obs)?;
        let logp = log_softmax(&fwd.logits);
        let h: T = logp.iter().map(|&lp| -lp.exp() * lp).sum();
        let n = fwd.values[s.head];
        let err = s.value_target - n;

        policy_loss = policy_loss - s.advantage * logp[s.action];
        value_loss = value_loss + half * err * err;
        entropy_sum = entropy_sum + h;

        for (j, d) in d_logits.iter_mut().enumerate() {
            let p = logp[j].exp();
            let onehot = if j == s.action { T::one() } else { T::zero() };
            *d = (-s.advantage * (onehot - p) + batch.entropy_cost * p * (logp[j] + h)) * inv_m;
        }
        let d_value = -batch.baseline_cost * err * inv_m;

        for (k, dh) in d_hidden.iter_mut().enumerate() {
            let mut acc = w.value_w[s.head * arch.hidden + k] * d_value;
            for (j, &dl) in d_logits.iter().enumerate() {
                acc = acc + w.policy_w[j * arch.hidden + k] * dl;
            }
            let hk = fwd.hidden[k];
            *dh = acc * (T::one() - hk * hk);
        }

        for (j, &dl) in d_logits.iter().enumerate() {
            let row = &mut grads.policy_w[j * arch.hidden..(j + 1) * arch.hidden];
            for (g, &hk) in row.iter_mut().zip(&fwd.hidden) {
                *g = *g + dl * hk;
            }
            grads.policy_b[j] = grads.policy_b[j] + dl;
        }
        let row = &mut grads.value_w[s.head * arch.hidden..(s.head + 1) * arch.hidden];
        for (g, &hk) in row.iter_mut().zip(&fwd.hidden) {
            *g = *g + d_value * hk;
        }
        grads.value_b[s.head] = grads.value_b[s.head] + d_value;

        for (k, &dz) in d_hidden.iter().enumerate() {
            if dz == T::zero() {
                continue;
            }
            let row = &mut grads.trunk_w[k * arch.obs_dim..(k + 1) * arch.obs_dim];
            for (g, &x) in row.iter_mut().zip(s.obs) {
                *g = *g + dz * x;
            }
            grads.trunk_b[k] = grads.trunk_b[k] + dz;
        }
    }

    let policy_loss = policy_loss * inv_m;
    let value_loss = value_loss * inv_m;
    let entropy = entropy_sum * inv_m;
    let total_loss = policy_loss + batch.baseline_cost * value_loss - batch.entropy_cost * entropy;
    Ok(GradientOutput {
        grads,
        policy_loss,
        value_loss,
        entropy,
        total_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::super::network::Architecture;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arch() -> Architecture {
        Architecture {
            obs_dim: 5,
            hidden: 6,
            actions: 4,
            heads: 3,
        }
    }

    fn random_params(rng: &mut ChaCha8Rng) -> NetworkParams<f64> {
        let mut p = NetworkParams::<f64>::zeros(arch());
        for i in 0..p.weights.len() {
            p.weights.set_flat(i, rng.gen_range(-0.8..0.8));
        }
        p
    }

    #[test]
    fn zero_coefficients_and_entropy_give_no_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = random_params(&mut rng);
        let obs: Vec<Vec<f64>> = (0..4).map(|_| (0..5).map(|_| rng.gen()).collect()).collect();
        let batch = LossInputs {
            samples: obs
                .iter()
                .enumerate()
                .map(|(i, o)| Sample {
                    obs: o,
                    action: i % 4,
                    head: i % 3,
                    value_target: 0.7,
                    advantage: 0.0,
                })
                .collect(),
            entropy_cost: 0.0,
            baseline_cost: 0.5,
        };
        let out = compute_gradients(&params, &batch).unwrap();
        assert!(out.grads.policy_w.iter().all(|&g| g == 0.0));
        assert!(out.grads.policy_b.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn value_head_gradient_vanishes_at_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = random_params(&mut rng);
        let obs: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
        let n = params.forward(&obs).unwrap().values[1];
        let batch = LossInputs {
            samples: vec![Sample {
                obs: &obs,
                action: 2,
                head: 1,
                value_target: n,
                advantage: 0.3,
            }],
            entropy_cost: 0.01,
            baseline_cost: 0.5,
        };
        let out = compute_gradients(&params, &batch).unwrap();
        assert!(out.grads.value_w.iter().all(|&g| g == 0.0));
        assert!(out.grads.value_b.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn only_the_sampled_head_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = random_params(&mut rng);
        let obs: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
        let batch = LossInputs {
            samples: vec![Sample {
                obs: &obs,
                action: 0,
                head: 2,
                value_target: 5.0,
                advantage: 1.0,
            }],
            entropy_cost: 0.01,
            baseline_cost: 0.5,
        };
        let g = compute_gradients(&params, &batch).unwrap().grads;
        let h = arch().hidden;
        assert!(g.value_w[..2 * h].iter().all(|&x| x == 0.0));
        assert_eq!(&g.value_b[..2], &[0.0, 0.0]);
        assert!(g.value_b[2] != 0.0);
    }

    #[test]
    fn errors() {
        let params = NetworkParams::<f64>::zeros(arch());
        let empty = LossInputs::<f64> {
            samples: vec![],
            entropy_cost: 0.0,
            baseline_cost: 0.5,
        };
        assert!(matches!(compute_gradients(&params, &empty), Err(Error::EmptyBatch)));
        let obs = [0.0; 5];
        let bad = LossInputs {
            samples: vec![Sample {
                obs: &obs,
                action: 0,
                head: 3,
                value_target: 0.0,
                advantage: 0.0,
            }],
            entropy_cost: 0.0,
            baseline_cost: 0.5,
        };
        assert!(matches!(
            compute_gradients(&params, &bad),
            Err(Error::TaskOutOfRange { task: 3, tasks: 3 })
        ));
    }

    #[test]
    fn coefficient_examples() {
        let s = NormStats::<f64>::default().with_moments(1.0, 5.0);
        assert_eq!(normalized_coefficient(5.0, &s, 1.0), 1.0);
        assert_eq!(normalized_coefficient(s.denormalize(0.37), &s, 0.37), 0.0);
        let tiny = NormStats::<f64>::default().with_moments(2.0, 4.0);
        assert_eq!(tiny.sigma(), 1e-4);
        assert!((normalized_coefficient(3.0, &tiny, 0.0) - 1e4).abs() < 1e-9);
    }
}
