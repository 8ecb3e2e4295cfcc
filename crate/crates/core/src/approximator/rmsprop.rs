use super::network::{NetworkParams, ParamSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsPropConfig<T> {
    pub learning_rate: T,
    pub decay: T,
    /// Added to the accumulator inside the square root.
    pub epsilon: T,
    pub max_grad_norm: T,
}

impl<T: Scalar> RmsPropConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > T::zero()
            && self.decay >= T::zero()
            && self.decay < T::one()
            && self.epsilon > T::zero()
            && self.max_grad_norm > T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid RMSProp settings: {self:?}")))
        }
    }
}

/// Outcome of an accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport<T> {
    /// Global norm before clipping.
    pub grad_norm: T,
    pub clipped: bool,
}

/// RMSProp without momentum, preceded by global gradient-norm clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp<T> {
    pub accum: ParamSet<T>,
    pub rejected_steps: u64,
}

impl<T: Scalar> RmsProp<T> {
    pub fn new(params: &NetworkParams<T>) -> Self {
        Self {
            accum: ParamSet::zeros(params.arch()),
            rejected_steps: 0,
        }
    }

    /// Applies one update in place and bumps the parameter version. A
    /// non-finite gradient leaves everything untouched except the rejection
    /// counter.
    pub fn step(
        &mut self,
        params: &mut NetworkParams<T>,
        grads: &ParamSet<T>,
        cfg: &RmsPropConfig<T>,
    ) -> Result<StepReport<T>> {
        cfg.validate()?;
        let grad_norm = grads.global_norm();
        if !grad_norm.is_finite() {
            self.rejected_steps += 1;
            return Err(Error::NonFiniteGradient);
        }
        let clipped = grad_norm > cfg.max_grad_norm;
        let factor = if clipped {
            cfg.max_grad_norm / grad_norm
        } else {
            T::one()
        };
        let keep = cfg.decay;
        let fresh = T::one() - cfg.decay;
        for ((p, g), m) in params
            .weights
            .blocks_mut()
            .into_iter()
            .zip(grads.blocks())
            .zip(self.accum.blocks_mut())
        {
            for ((p, &g), m) in p.iter_mut().zip(g).zip(m.iter_mut()) {
                let g = g * factor;
                *m = keep * *m + fresh * g * g;
                *p = *p - cfg.learning_rate * g / (*m + cfg.epsilon).sqrt();
            }
        }
        params.version += 1;
        Ok(StepReport { grad_norm, clipped })
    }
}

#[cfg(test)]
mod tests {
    use super::super::network::Architecture;
    use super::*;

    fn tiny() -> NetworkParams<f64> {
        NetworkParams::zeros(Architecture {
            obs_dim: 1,
            hidden: 1,
            actions: 2,
            heads: 1,
        })
    }

    fn cfg(max_grad_norm: f64) -> RmsPropConfig<f64> {
        RmsPropConfig {
            learning_rate: 0.1,
            decay: 0.9,
            epsilon: 1e-10,
            max_grad_norm,
        }
    }

    #[test]
    fn single_step_by_hand() {
        let mut params = tiny();
        let mut opt = RmsProp::new(&params);
        let mut g = ParamSet::zeros(params.arch());
        g.trunk_b[0] = 1.0;
        let report = opt.step(&mut params, &g, &cfg(100.0)).unwrap();
        assert!(!report.clipped);
        assert!((opt.accum.trunk_b[0] - 0.1).abs() < 1e-15);
        let expected = -0.1 / (0.1f64 + 1e-10).sqrt();
        assert!((params.weights.trunk_b[0] - expected).abs() < 1e-15);
        assert!((params.weights.trunk_b[0] + 0.3162).abs() < 1e-4);
        assert_eq!(params.version, 1);
    }

    #[test]
    fn global_norm_is_clipped_first() {
        let mut params = tiny();
        let mut opt = RmsProp::new(&params);
        let mut g = ParamSet::zeros(params.arch());
        g.trunk_w[0] = 12.0;
        g.policy_b[1] = 16.0;
        let report = opt.step(&mut params, &g, &cfg(10.0)).unwrap();
        assert_eq!(report.grad_norm, 20.0);
        assert!(report.clipped);
        // Scaled gradients are 6 and 8.
        assert!((opt.accum.trunk_w[0] - 0.1 * 36.0).abs() < 1e-12);
        assert!((opt.accum.policy_b[1] - 0.1 * 64.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_still_bumps_version() {
        let mut params = tiny();
        params.weights.policy_w = vec![0.5, -0.5];
        let before = params.weights.clone();
        let mut opt = RmsProp::new(&params);
        let zero = ParamSet::zeros(params.arch());
        opt.step(&mut params, &zero, &cfg(40.0)).unwrap();
        assert_eq!(params.weights, before);
        assert_eq!(params.version, 1);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut params = tiny();
        let mut opt = RmsProp::new(&params);
        let mut g = ParamSet::zeros(params.arch());
        g.value_b[0] = f64::NAN;
        assert!(matches!(
            opt.step(&mut params, &g, &cfg(40.0)),
            Err(Error::NonFiniteGradient)
        ));
        assert_eq!(opt.rejected_steps, 1);
        assert_eq!(params.version, 0);
    }
}
