//! Synthetic multi-task environments with a shared four-action interface.
//!
//! Three families are provided:
//!
//! * `chain`: states `0..L`, start at 0, goal at `L-1`. Action 1 moves right,
//!   action 0 moves left (floored at 0), actions 2 and 3 do nothing.
//! * `grid`: a `W x H` grid (cell `y * W + x`), start at the top-left corner,
//!   goal at the bottom-right. Actions 0/1/2/3 move left/right/down/up;
//!   moves into the border or a wall cell leave the agent in place.
//! * `dense_walk`: a line of `L` cells walked like a chain, with no goal.
//!   Every step pays `scale * Bernoulli(0.3)` until the episode cap.
//!
//! Rewards are multiplied by the task's scale and then passed through its
//! transform. Observations are one-hot over the suite-wide layout and never
//! carry the task id: two tasks with the same family and size produce
//! identical observations for identical states.

mod oracle;
mod suite;

pub use oracle::{
    oracle_optimal_return, oracle_random_return, read_oracle_csv, write_oracle_csv, OptimalPlan,
    OracleRow, RandomEstimate,
};
pub use suite::Suite;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Size of the action set shared by every family.
pub const NUM_ACTIONS: usize = 4;
/// Reward probability per step in `dense_walk`.
pub const DENSE_WALK_P: f64 = 0.3;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const DOWN: usize = 2;
pub const UP: usize = 3;

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " '{}', expected one of: {}"),
                        other,
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

keyword_enum!(Family { Chain => "chain", Grid => "grid", DenseWalk => "dense_walk" });
keyword_enum!(Sparsity { Dense => "dense", TerminalOnly => "terminal_only" });
keyword_enum!(RewardTransform { None => "none", Clip => "clip", Oar => "oar" });

impl RewardTransform {
    pub fn apply(&self, r: f64) -> f64 {
        match self {
            RewardTransform::None => r,
            RewardTransform::Clip => r.clamp(-1.0, 1.0),
            RewardTransform::Oar => {
                let t = r.tanh();
                -0.3 * t.min(0.0) + 5.0 * t.max(0.0)
            }
        }
    }
}

/// `transform.apply(r)`
pub fn transform_reward(r: f64, transform: RewardTransform) -> f64 {
    transform.apply(r)
}

/// Definition of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task_id: usize,
    pub family: Family,
    /// Chain or walk length; unused by grids.
    pub length: usize,
    pub width: usize,
    pub height: usize,
    /// Blocked grid cells as `(x, y)`.
    pub walls: Vec<(usize, usize)>,
    pub reward_scale: f64,
    pub sparsity: Sparsity,
    pub gamma: f64,
    pub transform: RewardTransform,
    pub episode_cap: usize,
}

impl TaskSpec {
    pub fn chain(task_id: usize, length: usize, reward_scale: f64) -> Self {
        Self {
            task_id,
            family: Family::Chain,
            length,
            width: 0,
            height: 0,
            walls: Vec::new(),
            reward_scale,
            sparsity: Sparsity::TerminalOnly,
            gamma: 0.99,
            transform: RewardTransform::None,
            episode_cap: 50,
        }
    }

    pub fn grid(task_id: usize, width: usize, height: usize, reward_scale: f64) -> Self {
        Self {
            family: Family::Grid,
            length: 0,
            width,
            height,
            ..Self::chain(task_id, 0, reward_scale)
        }
    }

    pub fn dense_walk(task_id: usize, length: usize, reward_scale: f64) -> Self {
        Self {
            family: Family::DenseWalk,
            sparsity: Sparsity::Dense,
            ..Self::chain(task_id, length, reward_scale)
        }
    }

    pub fn with_transform(mut self, transform: RewardTransform) -> Self {
        self.transform = transform;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_cap(mut self, episode_cap: usize) -> Self {
        self.episode_cap = episode_cap;
        self
    }

    pub fn with_sparsity(mut self, sparsity: Sparsity) -> Self {
        self.sparsity = sparsity;
        self
    }

    pub fn num_states(&self) -> usize {
        match self.family {
            Family::Chain | Family::DenseWalk => self.length,
            Family::Grid => self.width * self.height,
        }
    }

    pub fn start_state(&self) -> usize {
        0
    }

    pub fn goal_state(&self) -> Option<usize> {
        match self.family {
            Family::DenseWalk => None,
            _ => Some(self.num_states() - 1),
        }
    }

    fn is_wall(&self, cell: usize) -> bool {
        self.family == Family::Grid
            && self
                .walls
                .iter()
                .any(|&(x, y)| y * self.width + x == cell)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("task {}: {msg}", self.task_id)));
        if !(self.reward_scale.is_finite() && self.reward_scale >= 0.0) {
            return fail(format!("reward scale {} must be finite and >= 0", self.reward_scale));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if self.episode_cap == 0 {
            return fail("episode cap must be at least 1".into());
        }
        match self.family {
            Family::Chain if self.length < 2 => return fail("chain length must be >= 2".into()),
            Family::DenseWalk if self.length < 1 => {
                return fail("walk length must be >= 1".into())
            }
            Family::Grid => {
                if self.width * self.height < 2 {
                    return fail("grid needs at least two cells".into());
                }
                for &(x, y) in &self.walls {
                    if x >= self.width || y >= self.height {
                        return fail(format!("wall ({x}, {y}) outside the grid"));
                    }
                }
                let goal = self.num_states() - 1;
                if self.is_wall(0) || self.is_wall(goal) {
                    return fail("start and goal cells cannot be walls".into());
                }
                if self.distances()[0].is_none() {
                    return fail("goal unreachable from start".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Deterministic successor of `state` under `action`.
    pub fn next_state(&self, state: usize, action: usize) -> usize {
        match self.family {
            Family::Chain | Family::DenseWalk => match action {
                LEFT => state.saturating_sub(1),
                RIGHT => (state + 1).min(self.length - 1),
                _ => state,
            },
            Family::Grid => {
                let (x, y) = (state % self.width, state / self.width);
                let (nx, ny) = match action {
                    LEFT => (x.wrapping_sub(1), y),
                    RIGHT => (x + 1, y),
                    DOWN => (x, y + 1),
                    _ => (x, y.wrapping_sub(1)),
                };
                if nx >= self.width || ny >= self.height {
                    return state;
                }
                let next = ny * self.width + nx;
                if self.is_wall(next) {
                    state
                } else {
                    next
                }
            }
        }
    }

    /// Shortest-path distance of every state to the goal (`None` when unreachable).
    fn distances(&self) -> Vec<Option<usize>> {
        let n = self.num_states();
        let mut dist = vec![None; n];
        let Some(goal) = self.goal_state() else {
            return dist;
        };
        // Moves are reversible, so a BFS outward from the goal is exact.
        dist[goal] = Some(0);
        let mut queue = VecDeque::from([goal]);
        while let Some(s) = queue.pop_front() {
            let d = dist[s].unwrap();
            for a in 0..NUM_ACTIONS {
                let t = self.next_state(s, a);
                if dist[t].is_none() && !self.is_wall(t) {
                    dist[t] = Some(d + 1);
                    queue.push_back(t);
                }
            }
        }
        dist
    }

    /// Expected unscaled reward and terminal flag of a transition. For
    /// `dense_walk` the reward is the Bernoulli mean.
    pub fn expected_outcome(&self, state: usize, next: usize, dist: &[Option<usize>]) -> (f64, bool) {
        let at_goal = Some(next) == self.goal_state();
        let base = match (self.family, self.sparsity) {
            (Family::DenseWalk, _) => DENSE_WALK_P,
            (_, Sparsity::TerminalOnly) => f64::from(u8::from(at_goal)),
            (_, Sparsity::Dense) => {
                let total = dist[self.start_state()].unwrap_or(1).max(1) as f64;
                let before = dist[state].unwrap_or(0) as f64;
                let after = dist[next].unwrap_or(0) as f64;
                (before - after) / total
            }
        };
        (base, at_goal)
    }

    pub(crate) fn goal_distances(&self) -> Vec<Option<usize>> {
        self.distances()
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    /// Scaled and transformed reward, the learning signal.
    pub reward: f64,
    /// Scaled reward before the transform.
    pub raw_reward: f64,
    pub terminated: bool,
}

/// A running environment. Owned by exactly one actor.
#[derive(Debug, Clone)]
pub struct EnvInstance {
    spec: TaskSpec,
    obs_dim: usize,
    dist: Vec<Option<usize>>,
    state: usize,
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl EnvInstance {
    /// The one-hot state is zero-padded to `obs_dim`, the suite-wide
    /// feature size; see [`Suite::make_env`].
    pub fn new(spec: TaskSpec, obs_dim: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if spec.num_states() > obs_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.num_states(),
                got: obs_dim,
            });
        }
        let dist = spec.goal_distances();
        Ok(Self {
            state: spec.start_state(),
            spec,
            obs_dim,
            dist,
            steps: 0,
            done: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// An environment with an unpadded observation.
    pub fn standalone(spec: TaskSpec, seed: u64) -> Result<Self> {
        let dim = spec.num_states();
        Self::new(spec, dim, seed)
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.state = self.spec.start_state();
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    pub fn observation(&self) -> Vec<f64> {
        let mut obs = vec![0.0; self.obs_dim];
        obs[self.state] = 1.0;
        obs
    }

    pub fn step(&mut self, action: usize) -> Result<Transition> {
        if action >= NUM_ACTIONS {
            return Err(Error::InvalidAction(action));
        }
        if self.done {
            return Err(Error::EpisodeTerminated);
        }
        let next = self.spec.next_state(self.state, action);
        let (expected, at_goal) = self.spec.expected_outcome(self.state, next, &self.dist);
        let base = match self.spec.family {
            Family::DenseWalk => f64::from(u8::from(self.rng.gen_bool(DENSE_WALK_P))),
            _ => expected,
        };
        self.state = next;
        self.steps += 1;
        self.done = at_goal || self.steps >= self.spec.episode_cap;
        let raw_reward = self.spec.reward_scale * base;
        Ok(Transition {
            observation: self.observation(),
            reward: self.spec.transform.apply(raw_reward),
            raw_reward,
            terminated: self.done,
        })
    }
}
