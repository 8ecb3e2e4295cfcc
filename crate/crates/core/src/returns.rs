//! V-trace value targets and policy-gradient targets.
//!
//! For a rollout of length `n` with truncated importance weights
//! `c_k = min(1, pi(a_k|s_k) / mu(a_k|s_k))` and temporal differences
//! `delta_k = r_{k+1} + gamma_k v(s_{k+1}) - v(s_k)`, the corrected return is
//!
//! ```text
//! G_t = v(s_t) + sum_{k=t}^{t+n-1} (prod_{j=t}^{k-1} gamma_j) (prod_{i=t}^{k} c_i) delta_k
//! ```
//!
//! computed here by the backward recursion
//! `G_t - v(s_t) = c_t delta_t + gamma_t c_t (G_{t+1} - v(s_{t+1}))`.
//! The policy target is `r_{t+1} + gamma_t G_{t+1}`, bootstrapping on
//! `v(s_{t+n})` at the last position.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ratios above this value saturate.
pub const RATIO_CAP: f64 = 1e6;

/// An importance ratio `pi / mu` computed in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceRatio<T> {
    pub rho: T,
    /// The raw ratio exceeded [`RATIO_CAP`] and was saturated.
    pub saturated: bool,
}

impl<T: Scalar> ImportanceRatio<T> {
    /// `min(1, rho)`
    pub fn clipped(&self) -> T {
        self.rho.min(T::one())
    }
}

/// `exp(target_logp - behavior_logp)`, saturating at [`RATIO_CAP`].
pub fn importance_ratio<T: Scalar>(target_logp: T, behavior_logp: T) -> ImportanceRatio<T> {
    let cap = T::lit(RATIO_CAP);
    let log_ratio = target_logp - behavior_logp;
    if log_ratio > cap.ln() {
        return ImportanceRatio {
            rho: cap,
            saturated: true,
        };
    }
    ImportanceRatio {
        rho: log_ratio.exp(),
        saturated: false,
    }
}

/// Inputs for one rollout. `values` holds unnormalized estimates
/// `v(s_t) ..= v(s_{t+n})` and is one longer than the other sequences.
#[derive(Debug, Clone, Copy)]
pub struct VTraceInputs<'a, T> {
    pub rewards: &'a [T],
    pub values: &'a [T],
    pub target_logp: &'a [T],
    pub behavior_logp: &'a [T],
    pub discounts: &'a [T],
}

#[derive(Debug, Clone, PartialEq)]
pub struct VTraceOutputs<T> {
    pub vtrace_returns: Vec<T>,
    pub policy_targets: Vec<T>,
    /// Number of importance ratios that hit [`RATIO_CAP`].
    pub saturated_ratios: usize,
}

impl<'a, T: Scalar> VTraceInputs<'a, T> {
    fn validate(&self) -> Result<usize> {
        let n = self.rewards.len();
        if n == 0 {
            return Err(Error::LengthMismatch {
                what: "rewards",
                expected: 1,
                got: 0,
            });
        }
        let checks = [
            ("values", n + 1, self.values.len()),
            ("target_logp", n, self.target_logp.len()),
            ("behavior_logp", n, self.behavior_logp.len()),
            ("discounts", n, self.discounts.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(Error::LengthMismatch {
                    what,
                    expected,
                    got,
                });
            }
        }
        Ok(n)
    }
}

pub fn compute_vtrace<T: Scalar>(inputs: &VTraceInputs<'_, T>) -> Result<VTraceOutputs<T>> {
    let n = inputs.validate()?;
    let mut saturated_ratios = 0;
    let mut clipped = Vec::with_capacity(n);
    for k in 0..n {
        let ratio = importance_ratio(inputs.target_logp[k], inputs.behavior_logp[k]);
        if !ratio.rho.is_finite() || !inputs.behavior_logp[k].is_finite() {
            return Err(Error::NonFiniteRatio(k));
        }
        saturated_ratios += usize::from(ratio.saturated);
        clipped.push(ratio.clipped());
    }

    let values = inputs.values;
    let mut vtrace_returns = vec![T::zero(); n];
    let mut acc = T::zero();
    for k in (0..n).rev() {
        let gamma = inputs.discounts[k];
        let delta = inputs.rewards[k] + gamma * values[k + 1] - values[k];
        acc = clipped[k] * (delta + gamma * acc);
        vtrace_returns[k] = values[k] + acc;
    }

    let policy_targets = (0..n)
        .map(|k| {
            let next = if k + 1 < n {
                vtrace_returns[k + 1]
            } else {
                values[n]
            };
            inputs.rewards[k] + inputs.discounts[k] * next
        })
        .collect();

    Ok(VTraceOutputs {
        vtrace_returns,
        policy_targets,
        saturated_ratios,
    })
}
