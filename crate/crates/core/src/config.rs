//! Run configuration in a plain `key = value` format.
//!
//! Every key has a default; a config file only needs the keys it changes and
//! command-line overrides use the same `key=value` syntax. `#` starts a comment.
//! [`RunConfig::to_config_string`] writes the fully resolved configuration,
//! which is what each run directory stores.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::normalizer::{DEFAULT_BETA, DEFAULT_SIGMA_HI, DEFAULT_SIGMA_LO};

/// Agent variants compared in the ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Per-task heads with adaptive normalization.
    PopArt,
    /// Per-task heads, statistics frozen at the identity.
    MultiHead,
    /// A single shared value head, no normalization.
    Baseline,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::PopArt, Variant::MultiHead, Variant::Baseline];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::PopArt => "popart",
            Variant::MultiHead => "multihead",
            Variant::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant '{s}', valid variants: popart, multihead, baseline"
                ))
            })
    }
}

/// How actors and the learner are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Actor and learner alternate on one thread; reproducible.
    Synchronous,
    /// Actors run on their own threads.
    FreeRunning,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sync" | "synchronous" => Ok(Mode::Synchronous),
            "async" | "free" | "free_running" => Ok(Mode::FreeRunning),
            _ => Err(Error::Config(format!("unknown mode '{s}', expected sync or async"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Synchronous => "sync",
            Mode::FreeRunning => "async",
        })
    }
}

/// Support of the hyperparameters tuned by population-based training.
pub mod bounds {
    pub const LEARNING_RATE: (f64, f64) = (5e-6, 5e-3);
    pub const ENTROPY_COST: (f64, f64) = (5e-5, 1e-2);
    pub const RMSPROP_EPSILON: [f64; 4] = [1e-1, 1e-3, 1e-5, 1e-7];
    pub const MAX_GRAD_NORM: (f64, f64) = (10.0, 100.0);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub entropy_cost: f64,
    pub rmsprop_epsilon: f64,
    pub max_grad_norm: f64,
    pub rmsprop_decay: f64,
    pub baseline_cost: f64,
    pub beta: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 2e-3,
            entropy_cost: 1e-3,
            rmsprop_epsilon: 1e-5,
            max_grad_norm: 40.0,
            rmsprop_decay: 0.99,
            baseline_cost: 0.5,
            beta: DEFAULT_BETA,
            sigma_lo: DEFAULT_SIGMA_LO,
            sigma_hi: DEFAULT_SIGMA_HI,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning_rate must be > 0",
        )?;
        check(self.entropy_cost >= 0.0, "entropy_cost must be >= 0")?;
        check(self.rmsprop_epsilon > 0.0, "rmsprop_epsilon must be > 0")?;
        check(self.max_grad_norm > 0.0, "max_grad_norm must be > 0")?;
        check(
            (0.0..1.0).contains(&self.rmsprop_decay),
            "rmsprop_decay must be in [0, 1)",
        )?;
        check(self.baseline_cost >= 0.0, "baseline_cost must be >= 0")?;
        check(self.beta > 0.0 && self.beta < 1.0, "beta must be in (0, 1)")?;
        check(
            self.sigma_lo > 0.0 && self.sigma_lo <= self.sigma_hi,
            "need 0 < sigma_lo <= sigma_hi",
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Built-in suite name or path to a suite file.
    pub suite: String,
    pub variant: Variant,
    /// Environment frames consumed by the learner, summed across tasks.
    pub frames: u64,
    /// 0 means two actors per task.
    pub actors: usize,
    pub rollout_len: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden: usize,
    /// 0 means twice the actor count.
    pub queue_capacity: usize,
    pub mode: Mode,
    /// Frames between intermediate checkpoints; 0 disables them.
    pub checkpoint_interval: u64,
    pub eval_episodes: usize,
    pub out: PathBuf,
    pub hyper: Hyperparams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            suite: "scale6".into(),
            variant: Variant::PopArt,
            frames: 2_000_000,
            actors: 0,
            rollout_len: 20,
            batch_size: 8,
            seed: 1,
            hidden: 64,
            queue_capacity: 0,
            mode: Mode::Synchronous,
            checkpoint_interval: 500_000,
            eval_episodes: 100,
            out: PathBuf::from("runs/default"),
            hyper: Hyperparams::default(),
        }
    }
}

impl RunConfig {
    pub fn actor_count(&self, tasks: usize) -> usize {
        if self.actors == 0 {
            2 * tasks
        } else {
            self.actors
        }
    }

    pub fn queue_capacity(&self, actors: usize) -> usize {
        if self.queue_capacity == 0 {
            2 * actors
        } else {
            self.queue_capacity
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rollout_len == 0 {
            return Err(Error::Config("rollout_len must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden must be >= 1".into()));
        }
        self.hyper.validate()
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{value}' for key '{key}'")))
        }
        let h = &mut self.hyper;
        match key {
            "suite" => self.suite = value.to_string(),
            "variant" => self.variant = value.parse()?,
            "frames" => self.frames = parse(key, value)?,
            "actors" => self.actors = parse(key, value)?,
            "rollout_len" => self.rollout_len = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "queue_capacity" => self.queue_capacity = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "checkpoint_interval" => self.checkpoint_interval = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "learning_rate" => h.learning_rate = parse(key, value)?,
            "entropy_cost" => h.entropy_cost = parse(key, value)?,
            "rmsprop_epsilon" => h.rmsprop_epsilon = parse(key, value)?,
            "max_grad_norm" => h.max_grad_norm = parse(key, value)?,
            "rmsprop_decay" => h.rmsprop_decay = parse(key, value)?,
            "baseline_cost" => h.baseline_cost = parse(key, value)?,
            "beta" => h.beta = parse(key, value)?,
            "sigma_lo" => h.sigma_lo = parse(key, value)?,
            "sigma_hi" => h.sigma_hi = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` strings, e.g. from the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for item in overrides {
            let item = item.as_ref();
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_config_string(&self) -> String {
        let h = &self.hyper;
        format!(
            "\
# resolved run configuration
suite = {}
variant = {}
frames = {}
actors = {}
rollout_len = {}          # 20 on Atari and 100 on DeepMind Lab at full scale
batch_size = {}           # 32 at full scale
seed = {}
hidden = {}
queue_capacity = {}
mode = {}
checkpoint_interval = {}
eval_episodes = {}        # 200 per level on Atari, 500 on DeepMind Lab
out = {}
learning_rate = {}        # tuned on log-uniform [5e-6, 5e-3]
entropy_cost = {}         # tuned on log-uniform [5e-5, 1e-2]
rmsprop_epsilon = {}      # tuned on {{1e-1, 1e-3, 1e-5, 1e-7}}
max_grad_norm = {}        # tuned on uniform [10, 100]
rmsprop_decay = {}        # RMSProp without momentum
baseline_cost = {}        # value loss weight
beta = {}                 # statistics decay, not tuned
sigma_lo = {}             # scale clamp
sigma_hi = {}
",
            self.suite,
            self.variant,
            self.frames,
            self.actors,
            self.rollout_len,
            self.batch_size,
            self.seed,
            self.hidden,
            self.queue_capacity,
            self.mode,
            self.checkpoint_interval,
            self.eval_episodes,
            self.out.display(),
            h.learning_rate,
            h.entropy_cost,
            h.rmsprop_epsilon,
            h.max_grad_norm,
            h.rmsprop_decay,
            h.baseline_cost,
            h.beta,
            h.sigma_lo,
            h.sigma_hi,
        )
    }
}
