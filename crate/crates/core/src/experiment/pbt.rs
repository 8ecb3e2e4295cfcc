use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agents::make_agent_config;
use super::evaluate::evaluate_checkpoint;
use super::scores::aggregate;
use crate::checkpoint::Checkpoint;
use crate::config::{bounds, Hyperparams, RunConfig};
use crate::error::{Error, Result};
use crate::runtime::{derive_seed, initial_state, run_training, NoObserver};
use crate::taskworld::{OracleRow, Suite};

#[derive(Debug, Clone, PartialEq)]
pub struct PbtSettings {
    pub population: usize,
    pub intervals: usize,
    /// Frames each member trains between two exploit steps.
    pub interval_frames: u64,
    pub exploit_fraction: f64,
    pub perturb_factors: Vec<f64>,
    /// Episodes per task when measuring fitness.
    pub eval_episodes: usize,
}

impl Default for PbtSettings {
    fn default() -> Self {
        Self {
            population: 4,
            intervals: 3,
            interval_frames: 100_000,
            exploit_fraction: 0.25,
            perturb_factors: vec![0.8, 1.25],
            eval_episodes: 100,
        }
    }
}

impl PbtSettings {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::PopulationTooSmall(self.population));
        }
        if !(self.exploit_fraction > 0.0 && self.exploit_fraction <= 0.5) {
            return Err(Error::Config("exploit_fraction must be in (0, 0.5]".into()));
        }
        if self.perturb_factors.is_empty() || self.perturb_factors.iter().any(|f| *f <= 0.0) {
            return Err(Error::Config("perturb_factors must be positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbtMember {
    pub member_id: usize,
    pub hyper: Hyperparams,
    pub checkpoint: Checkpoint,
    /// `None` until the member is evaluated after its last change.
    pub fitness: Option<f64>,
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    rng.gen_range(lo.ln()..=hi.ln()).exp()
}

/// Draws the tuned hyperparameters from their supports; the rest come from `base`.
pub fn sample_hyperparams<R: Rng + ?Sized>(base: &Hyperparams, rng: &mut R) -> Hyperparams {
    Hyperparams {
        learning_rate: log_uniform(rng, bounds::LEARNING_RATE),
        entropy_cost: log_uniform(rng, bounds::ENTROPY_COST),
        rmsprop_epsilon: *bounds::RMSPROP_EPSILON.choose(rng).expect("non-empty"),
        max_grad_norm: rng.gen_range(bounds::MAX_GRAD_NORM.0..=bounds::MAX_GRAD_NORM.1),
        ..*base
    }
}

pub fn within_supports(h: &Hyperparams) -> bool {
    let inside = |x: f64, (lo, hi): (f64, f64)| lo <= x && x <= hi;
    inside(h.learning_rate, bounds::LEARNING_RATE)
        && inside(h.entropy_cost, bounds::ENTROPY_COST)
        && bounds::RMSPROP_EPSILON.contains(&h.rmsprop_epsilon)
        && inside(h.max_grad_norm, bounds::MAX_GRAD_NORM)
}

fn perturb<R: Rng + ?Sized>(h: &Hyperparams, factors: &[f64], rng: &mut R) -> Hyperparams {
    let mut scale = |x: f64, (lo, hi): (f64, f64)| {
        (x * factors.choose(rng).expect("non-empty")).clamp(lo, hi)
    };
    let learning_rate = scale(h.learning_rate, bounds::LEARNING_RATE);
    let entropy_cost = scale(h.entropy_cost, bounds::ENTROPY_COST);
    let max_grad_norm = scale(h.max_grad_norm, bounds::MAX_GRAD_NORM);
    Hyperparams {
        learning_rate,
        entropy_cost,
        max_grad_norm,
        rmsprop_epsilon: *bounds::RMSPROP_EPSILON.choose(rng).expect("non-empty"),
        ..*h
    }
}

/// Exploit and explore. Members in the bottom `exploit_fraction` by fitness
/// take the checkpoint (weights, statistics, optimizer state) and the
/// hyperparameters of a uniformly drawn member of the top fraction, then
/// perturb the copied hyperparameters. Returns `(receiver, donor)` pairs.
pub fn pbt_step<R: Rng + ?Sized>(
    population: &mut [PbtMember],
    exploit_fraction: f64,
    perturb_factors: &[f64],
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if population.len() < 2 {
        return Err(Error::PopulationTooSmall(population.len()));
    }
    let fitness: Vec<f64> = population
        .iter()
        .map(|m| {
            m.fitness
                .ok_or_else(|| Error::Config(format!("member {} has no fitness", m.member_id)))
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    let count = ((population.len() as f64 * exploit_fraction).floor() as usize).max(1);
    let (bottom, top) = (&order[..count], &order[order.len() - count..]);
    let mut copies = Vec::with_capacity(count);
    for &loser in bottom {
        let donor = *top.choose(rng).expect("non-empty");
        let source = population[donor].clone();
        let member = &mut population[loser];
        member.checkpoint = source.checkpoint;
        member.hyper = perturb(&source.hyper, perturb_factors, rng);
        member.fitness = None;
        copies.push((member.member_id, source.member_id));
    }
    Ok(copies)
}

/// One line of the fitness history.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessRow {
    pub interval: usize,
    pub member_id: usize,
    pub fitness: f64,
    pub frames: u64,
    pub hyper: Hyperparams,
    /// Member this one copied from right after the evaluation, if any.
    pub copied_from: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PbtOutcome {
    pub members: Vec<PbtMember>,
    pub history: Vec<FitnessRow>,
}

impl PbtOutcome {
    /// Best fitness in the population at each evaluation, starting with the
    /// initial one.
    pub fn max_fitness_per_interval(&self) -> Vec<f64> {
        let last = self.history.iter().map(|r| r.interval).max().unwrap_or(0);
        (0..=last)
            .map(|i| {
                self.history
                    .iter()
                    .filter(|r| r.interval == i)
                    .map(|r| r.fitness)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }
}

fn measure(member: &mut PbtMember, suite: &Suite, refs: &[OracleRow], episodes: usize, seed: u64) -> Result<f64> {
    let records = evaluate_checkpoint(&member.checkpoint, suite, refs, episodes, seed)?;
    let fitness = aggregate(&records)?.mean_capped;
    member.fitness = Some(fitness);
    Ok(fitness)
}

/// Trains a population for `settings.intervals` intervals with an exploit
/// step after each evaluation except the last. Fitness is the mean capped
/// score, always measured with the same evaluation seed.
pub fn run_pbt(
    cfg: &RunConfig,
    suite: &Suite,
    settings: &PbtSettings,
    references: &[OracleRow],
) -> Result<PbtOutcome> {
    cfg.validate()?;
    settings.validate()?;
    let agent = make_agent_config(cfg.variant);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x9b7));
    let mut members = Vec::with_capacity(settings.population);
    for member_id in 0..settings.population {
        let hyper = sample_hyperparams(&cfg.hyper, &mut rng);
        info!(
            "member {member_id}: lr {:.3e} entropy {:.3e} eps {:.0e} max_grad_norm {:.1} within supports: {}",
            hyper.learning_rate,
            hyper.entropy_cost,
            hyper.rmsprop_epsilon,
            hyper.max_grad_norm,
            within_supports(&hyper)
        );
        let mut member_cfg = cfg.clone();
        member_cfg.seed = derive_seed(cfg.seed, member_id as u64);
        member_cfg.hyper = hyper;
        members.push(PbtMember {
            member_id,
            hyper,
            checkpoint: Checkpoint {
                variant: cfg.variant,
                suite: suite.name.clone(),
                steps: 0,
                frames: 0,
                state: initial_state(&member_cfg, suite, &agent),
            },
            fitness: None,
        });
    }

    let mut history = Vec::new();
    for interval in 0..=settings.intervals {
        if interval > 0 {
            for m in members.iter_mut() {
                let mut member_cfg = cfg.clone();
                member_cfg.frames = settings.interval_frames;
                member_cfg.hyper = m.hyper;
                member_cfg.seed = derive_seed(cfg.seed, (interval * settings.population + m.member_id) as u64);
                let init = m.checkpoint.state.clone();
                let out = run_training(&member_cfg, suite, agent, Some(init), &mut NoObserver)?;
                m.checkpoint.steps += out.learner.steps();
                m.checkpoint.frames += out.learner.frames();
                m.checkpoint.state = out.learner.state;
            }
        }
        let first = history.len();
        for m in members.iter_mut() {
            let fitness = measure(m, suite, references, settings.eval_episodes, cfg.seed)?;
            history.push(FitnessRow {
                interval,
                member_id: m.member_id,
                fitness,
                frames: m.checkpoint.frames,
                hyper: m.hyper,
                copied_from: None,
            });
        }
        info!(
            "pbt interval {interval}: fitness {:?}",
            history[first..].iter().map(|r| r.fitness).collect::<Vec<_>>()
        );
        if interval < settings.intervals {
            for (receiver, donor) in pbt_step(&mut members, settings.exploit_fraction, &settings.perturb_factors, &mut rng)? {
                history[first + receiver].copied_from = Some(donor);
            }
        }
    }
    Ok(PbtOutcome { members, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::Architecture;
    use crate::config::Variant;
    use crate::runtime::LearnerState;
    use crate::Params;

    fn member(id: usize, fitness: f64, lr: f64) -> PbtMember {
        let arch = Architecture {
            obs_dim: 2,
            hidden: 2,
            actions: 4,
            heads: 1,
        };
        let mut params = Params::zeros(arch);
        params.weights.policy_b[0] = id as f64;
        let hyper = Hyperparams {
            learning_rate: lr,
            ..Hyperparams::default()
        };
        PbtMember {
            member_id: id,
            hyper,
            checkpoint: Checkpoint {
                variant: Variant::PopArt,
                suite: "s".into(),
                steps: 0,
                frames: 0,
                state: LearnerState::new(params, 1, &hyper),
            },
            fitness: Some(fitness),
        }
    }

    #[test]
    fn bottom_member_copies_top() {
        let mut pop = vec![member(0, 0.2, 1e-3), member(1, 0.8, 1e-3)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let copies = pbt_step(&mut pop, 0.5, &[0.8, 1.25], &mut rng).unwrap();
        assert_eq!(copies, vec![(0, 1)]);
        assert_eq!(pop[0].checkpoint, pop[1].checkpoint);
        assert!(pop[0].fitness.is_none());
        let lr = pop[0].hyper.learning_rate;
        assert!((lr - 8e-4).abs() < 1e-15 || (lr - 1.25e-3).abs() < 1e-15, "{lr}");
        assert_eq!(pop[0].member_id, 0);
    }

    #[test]
    fn perturbation_is_clamped_to_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let high = Hyperparams {
            learning_rate: 5e-3,
            entropy_cost: 1e-2,
            max_grad_norm: 100.0,
            ..Hyperparams::default()
        };
        for _ in 0..50 {
            let h = perturb(&high, &[0.8, 1.25], &mut rng);
            assert!(within_supports(&h), "{h:?}");
        }
    }

    #[test]
    fn conservation_and_symmetry() {
        let mut pop: Vec<_> = (0..4).map(|i| member(i, i as f64, 1e-3)).collect();
        let before: Vec<Checkpoint> = pop.iter().map(|m| m.checkpoint.clone()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        pbt_step(&mut pop, 0.25, &[0.8, 1.25], &mut rng).unwrap();
        assert_eq!(pop.len(), 4);
        assert!(pop.iter().all(|m| before.contains(&m.checkpoint)));
        assert_eq!(pop[0].checkpoint, before[3]);

        let mut same: Vec<_> = (0..4)
            .map(|i| PbtMember {
                member_id: i,
                ..member(0, 0.5, 1e-3)
            })
            .collect();
        let snapshot = same[0].checkpoint.clone();
        pbt_step(&mut same, 0.25, &[0.8, 1.25], &mut rng).unwrap();
        assert!(same.iter().all(|m| m.checkpoint == snapshot));
    }

    #[test]
    fn small_or_unevaluated_populations_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut one = vec![member(0, 0.0, 1e-3)];
        assert!(matches!(pbt_step(&mut one, 0.5, &[1.0], &mut rng), Err(Error::PopulationTooSmall(1))));
        let mut pop = vec![member(0, 0.0, 1e-3), member(1, 0.0, 1e-3)];
        pop[1].fitness = None;
        assert!(pbt_step(&mut pop, 0.5, &[1.0], &mut rng).is_err());
        let settings = PbtSettings {
            population: 1,
            ..PbtSettings::default()
        };
        assert!(settings.validate().is_err());
    }

    #[test]
    fn sampled_hyperparameters_respect_supports() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert!(within_supports(&sample_hyperparams(&Hyperparams::default(), &mut rng)));
        }
    }
}
