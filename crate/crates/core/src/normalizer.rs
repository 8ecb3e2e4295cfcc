//! Adaptive return statistics and the output-preserving rescaling of value heads.
//!
//! Each task owns a [`NormStats`] tracking exponential moving averages of the
//! first and second moments of its value targets. The value network predicts
//! targets in normalized units; `denormalize` maps them back to reward units.
//! Whenever the statistics move, [`preserve_outputs`] rewrites the matching
//! head row so that unnormalized predictions are unchanged.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default decay of the moment estimates.
pub const DEFAULT_BETA: f64 = 3e-4;
/// Lower clamp applied to the derived scale.
pub const DEFAULT_SIGMA_LO: f64 = 1e-4;
/// Upper clamp applied to the derived scale.
pub const DEFAULT_SIGMA_HI: f64 = 1e6;

/// First and second moment estimates of a task's value targets.
///
/// The scale `sigma` is never stored; it is derived from `nu - mu^2`, floored
/// at zero and clamped into `[sigma_lo, sigma_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats<T> {
    pub mu: T,
    pub nu: T,
    pub beta: T,
    pub sigma_lo: T,
    pub sigma_hi: T,
}

impl<T: Scalar> Default for NormStats<T> {
    fn default() -> Self {
        Self::new(
            T::lit(DEFAULT_BETA),
            T::lit(DEFAULT_SIGMA_LO),
            T::lit(DEFAULT_SIGMA_HI),
        )
    }
}

impl<T: Scalar> NormStats<T> {
    /// Identity normalization: `mu = 0`, `nu = 1`, hence `sigma = 1`.
    pub fn new(beta: T, sigma_lo: T, sigma_hi: T) -> Self {
        Self {
            mu: T::zero(),
            nu: T::one(),
            beta,
            sigma_lo,
            sigma_hi,
        }
    }

    /// Same decay and clamps as `self`, different moments.
    pub fn with_moments(&self, mu: T, nu: T) -> Self {
        Self { mu, nu, ..*self }
    }

    pub fn is_valid(&self) -> bool {
        self.mu.is_finite()
            && self.nu.is_finite()
            && self.beta > T::zero()
            && self.beta < T::one()
            && self.sigma_lo > T::zero()
            && self.sigma_lo <= self.sigma_hi
    }

    /// Derived scale, always inside `[sigma_lo, sigma_hi]`.
    pub fn sigma(&self) -> T {
        let var = (self.nu - self.mu * self.mu).max(T::zero());
        let sigma = var.sqrt();
        if sigma.is_nan() {
            return self.sigma_lo;
        }
        sigma.max(self.sigma_lo).min(self.sigma_hi)
    }

    /// One exponential moving average step towards `target`.
    pub fn update(&self, target: T) -> Result<Self> {
        if !target.is_finite() {
            return Err(Error::NonFiniteTarget(target.as_f64()));
        }
        Ok(self.blend(target, target * target))
    }

    /// One update from a whole rollout: the first moment moves towards the
    /// mean target, the second towards the mean squared target.
    pub fn update_from_rollout(&self, targets: &[T]) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptyTargets);
        }
        if let Some(bad) = targets.iter().find(|t| !t.is_finite()) {
            return Err(Error::NonFiniteTarget(bad.as_f64()));
        }
        let n = T::lit(targets.len() as f64);
        let mean = targets.iter().copied().sum::<T>() / n;
        let mean_sq = targets.iter().map(|&t| t * t).sum::<T>() / n;
        Ok(self.blend(mean, mean_sq))
    }

    fn blend(&self, first: T, second: T) -> Self {
        let keep = T::one() - self.beta;
        self.with_moments(
            keep * self.mu + self.beta * first,
            keep * self.nu + self.beta * second,
        )
    }

    /// `(g - mu) / sigma`
    #[inline]
    pub fn normalize(&self, g: T) -> T {
        (g - self.mu) / self.sigma()
    }

    /// `sigma * n + mu`
    #[inline]
    pub fn denormalize(&self, n: T) -> T {
        self.sigma() * n + self.mu
    }
}

/// Rescales a head row and bias so that `sigma * (w.f + b) + mu` is unchanged
/// when the statistics move from `old` to `new`.
pub fn preserve_outputs<T: Scalar>(
    w_row: &[T],
    b: T,
    old: &NormStats<T>,
    new: &NormStats<T>,
) -> (Vec<T>, T) {
    let mut w = w_row.to_vec();
    let b = preserve_outputs_in_place(&mut w, b, old, new);
    (w, b)
}

/// In-place form of [`preserve_outputs`]; returns the new bias.
pub fn preserve_outputs_in_place<T: Scalar>(
    w_row: &mut [T],
    b: T,
    old: &NormStats<T>,
    new: &NormStats<T>,
) -> T {
    let (sigma, sigma_new) = (old.sigma(), new.sigma());
    if sigma == sigma_new && old.mu == new.mu {
        return b;
    }
    let ratio = sigma / sigma_new;
    for w in w_row.iter_mut() {
        *w = *w * ratio;
    }
    (sigma * b + old.mu - new.mu) / sigma_new
}

/// One [`NormStats`] per task, indexed by task id.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStatsVector<T> {
    stats: Vec<NormStats<T>>,
}

impl<T: Scalar> TaskStatsVector<T> {
    pub fn new(tasks: usize, template: NormStats<T>) -> Self {
        Self {
            stats: vec![template; tasks],
        }
    }

    pub fn from_vec(stats: Vec<NormStats<T>>) -> Self {
        Self { stats }
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn get(&self, task: usize) -> Result<&NormStats<T>> {
        self.stats.get(task).ok_or(Error::TaskOutOfRange {
            task,
            tasks: self.stats.len(),
        })
    }

    pub fn set(&mut self, task: usize, stats: NormStats<T>) -> Result<()> {
        let tasks = self.stats.len();
        let slot = self
            .stats
            .get_mut(task)
            .ok_or(Error::TaskOutOfRange { task, tasks })?;
        *slot = stats;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &NormStats<T>> {
        self.stats.iter()
    }
}
