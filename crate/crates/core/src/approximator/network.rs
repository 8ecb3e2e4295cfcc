use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Layer sizes of the shared trunk and its heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub obs_dim: usize,
    pub hidden: usize,
    pub actions: usize,
    /// Number of value heads, one per task (or one for a shared baseline).
    pub heads: usize,
}

/// Names of the parameter blocks in storage order.
pub const BLOCK_NAMES: [&str; 6] = [
    "trunk.w", "trunk.b", "policy.w", "policy.b", "value.w", "value.b",
];

/// All trainable arrays of the network, row-major. Also used to hold gradients
/// and optimizer accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub arch: Architecture,
    pub trunk_w: Vec<T>,
    pub trunk_b: Vec<T>,
    pub policy_w: Vec<T>,
    pub policy_b: Vec<T>,
    pub value_w: Vec<T>,
    pub value_b: Vec<T>,
}

impl Architecture {
    /// `(rows, cols)` of each block, in [`BLOCK_NAMES`] order. Bias vectors
    /// have a single column.
    pub fn block_shapes(&self) -> [(usize, usize); 6] {
        [
            (self.hidden, self.obs_dim),
            (self.hidden, 1),
            (self.actions, self.hidden),
            (self.actions, 1),
            (self.heads, self.hidden),
            (self.heads, 1),
        ]
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn zeros(arch: Architecture) -> Self {
        let z = |n: usize| vec![T::zero(); n];
        Self {
            arch,
            trunk_w: z(arch.hidden * arch.obs_dim),
            trunk_b: z(arch.hidden),
            policy_w: z(arch.actions * arch.hidden),
            policy_b: z(arch.actions),
            value_w: z(arch.heads * arch.hidden),
            value_b: z(arch.heads),
        }
    }

    pub fn blocks(&self) -> [&[T]; 6] {
        [
            &self.trunk_w,
            &self.trunk_b,
            &self.policy_w,
            &self.policy_b,
            &self.value_w,
            &self.value_b,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<T>; 6] {
        [
            &mut self.trunk_w,
            &mut self.trunk_b,
            &mut self.policy_w,
            &mut self.policy_b,
            &mut self.value_w,
            &mut self.value_b,
        ]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.blocks().into_iter().flat_map(|b| b.iter())
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn global_norm(&self) -> T {
        self.iter().map(|&g| g * g).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, factor: T) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|g| *g = *g * factor);
        }
    }

    /// Value of the `index`-th scalar in storage order.
    pub fn get_flat(&self, mut index: usize) -> T {
        for block in self.blocks() {
            if index < block.len() {
                return block[index];
            }
            index -= block.len();
        }
        panic!("flat index out of range")
    }

    pub fn set_flat(&mut self, mut index: usize, value: T) {
        for block in self.blocks_mut() {
            if index < block.len() {
                block[index] = value;
                return;
            }
            index -= block.len();
        }
        panic!("flat index out of range")
    }
}

/// A versioned parameter snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    pub weights: ParamSet<T>,
    pub version: u64,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward<T> {
    pub hidden: Vec<T>,
    pub logits: Vec<T>,
    /// Normalized value prediction of every head.
    pub values: Vec<T>,
}

impl<T: Scalar> NetworkParams<T> {
    /// Trunk weights uniform in `±1/sqrt(obs_dim)`, zero trunk biases and
    /// zero heads: initial values are 0 and the initial policy uniform.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut weights = ParamSet::zeros(arch);
        let bound = 1.0 / (arch.obs_dim.max(1) as f64).sqrt();
        for w in weights.trunk_w.iter_mut() {
            *w = T::lit(rng.gen_range(-bound..=bound));
        }
        Self {
            weights,
            version: 0,
        }
    }

    pub fn zeros(arch: Architecture) -> Self {
        Self {
            weights: ParamSet::zeros(arch),
            version: 0,
        }
    }

    pub fn arch(&self) -> Architecture {
        self.weights.arch
    }

    pub fn forward(&self, obs: &[T]) -> Result<Forward<T>> {
        let a = self.arch();
        if obs.len() != a.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: a.obs_dim,
                got: obs.len(),
            });
        }
        let w = &self.weights;
        let hidden: Vec<T> = (0..a.hidden)
            .map(|j| (dot(&w.trunk_w[j * a.obs_dim..(j + 1) * a.obs_dim], obs) + w.trunk_b[j]).tanh())
            .collect();
        let logits = affine(&w.policy_w, &w.policy_b, &hidden);
        let values = affine(&w.value_w, &w.value_b, &hidden);
        Ok(Forward {
            hidden,
            logits,
            values,
        })
    }

    /// Action probabilities at `obs`.
    pub fn policy(&self, obs: &[T]) -> Result<Vec<T>> {
        Ok(softmax(&self.forward(obs)?.logits))
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn affine<T: Scalar>(w: &[T], b: &[T], x: &[T]) -> Vec<T> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| dot(&w[r * cols..(r + 1) * cols], x) + bias)
        .collect()
}

/// Numerically stable `log softmax`.
pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let log_z = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
    logits.iter().map(|&z| z - log_z).collect()
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    log_softmax(logits).into_iter().map(T::exp).collect()
}

/// Shannon entropy of `softmax(logits)`, in nats.
pub fn entropy<T: Scalar>(logits: &[T]) -> T {
    log_softmax(logits)
        .into_iter()
        .map(|lp| -lp.exp() * lp)
        .sum()
}
