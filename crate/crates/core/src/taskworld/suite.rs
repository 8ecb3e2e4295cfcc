//! Task suites and their plain-text definition format.
//!
//! A suite file is a sequence of `[task]` sections made of `key = value`
//! lines. `#` starts a comment. An optional `name = ...` line may precede the
//! first section. Task ids are assigned in file order.
//!
//! ```text
//! name = scale6
//! [task]
//! family = chain          # chain | grid | dense_walk
//! length = 8              # chain / dense_walk
//! scale = 0.01
//! sparsity = terminal_only
//! gamma = 0.99
//! transform = none        # none | clip | oar
//! cap = 50
//! [task]
//! family = grid
//! width = 4
//! height = 4
//! walls = 1:1 2:3         # optional blocked cells, x:y
//! scale = 100
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{EnvInstance, Family, RewardTransform, Sparsity, TaskSpec};
use crate::error::{Error, Result};

/// An ordered set of tasks sharing one observation space: the one-hot state
/// padded to the largest state count in the suite. Observations never encode
/// the task.
#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub name: String,
    tasks: Vec<TaskSpec>,
    obs_dim: usize,
}

impl Suite {
    /// Task ids are reassigned to match positions.
    pub fn new(name: impl Into<String>, mut tasks: Vec<TaskSpec>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Config("suite has no tasks".into()));
        }
        for (i, task) in tasks.iter_mut().enumerate() {
            task.task_id = i;
            task.validate()?;
        }
        let obs_dim = tasks.iter().map(TaskSpec::num_states).max().unwrap_or(0);
        Ok(Self {
            name: name.into(),
            tasks,
            obs_dim,
        })
    }

    /// Chain of length 8 and 4x4 grid at reward scales 0.01, 1 and 100.
    pub fn scale6() -> Self {
        Self::scale6_with(RewardTransform::None, "scale6")
    }

    /// [`Suite::scale6`] with rewards clipped to `[-1, 1]`.
    pub fn clipped6() -> Self {
        Self::scale6_with(RewardTransform::Clip, "clipped6")
    }

    fn scale6_with(transform: RewardTransform, name: &str) -> Self {
        let mut tasks = Vec::new();
        for scale in [0.01, 1.0, 100.0] {
            tasks.push(TaskSpec::chain(0, 8, scale).with_transform(transform));
        }
        for scale in [0.01, 1.0, 100.0] {
            tasks.push(TaskSpec::grid(0, 4, 4, scale).with_transform(transform));
        }
        Self::new(name, tasks).expect("built-in suite is valid")
    }

    /// Small two-task suite for population-based training.
    pub fn pbt2() -> Self {
        Self::new(
            "pbt2",
            vec![TaskSpec::chain(0, 6, 1.0), TaskSpec::grid(1, 3, 3, 10.0)],
        )
        .expect("built-in suite is valid")
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["scale6", "clipped6", "pbt2"]
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "scale6" => Some(Self::scale6()),
            "clipped6" => Some(Self::clipped6()),
            "pbt2" => Some(Self::pbt2()),
            _ => None,
        }
    }

    /// A built-in name or a path to a suite file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(suite) = Self::builtin(name_or_path) {
            return Ok(suite);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::Config(format!(
                "unknown suite '{name_or_path}': not a file and not one of {}",
                Self::builtin_names().join(", ")
            )));
        }
        Self::load(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let default_name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "suite".into());
        Self::parse(&text, &default_name)
    }

    pub fn parse(text: &str, default_name: &str) -> Result<Self> {
        let mut name = default_name.to_string();
        let mut tasks: Vec<TaskSpec> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            if line == "[task]" {
                tasks.push(TaskSpec::chain(tasks.len(), 0, 1.0));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
            let Some(task) = tasks.last_mut() else {
                if key == "name" {
                    name = value.to_string();
                    continue;
                }
                return Err(err(format!("key '{key}' outside a [task] section")));
            };
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("bad number '{v}'")));
            let int = |v: &str| v.parse::<usize>().map_err(|_| err(format!("bad integer '{v}'")));
            match key {
                "family" => task.family = value.parse()?,
                "length" => task.length = int(value)?,
                "width" => task.width = int(value)?,
                "height" => task.height = int(value)?,
                "walls" => {
                    task.walls = value
                        .split_whitespace()
                        .map(|cell| {
                            let (x, y) = cell
                                .split_once(':')
                                .ok_or_else(|| err(format!("bad wall '{cell}', expected x:y")))?;
                            Ok((int(x)?, int(y)?))
                        })
                        .collect::<Result<_>>()?
                }
                "scale" => task.reward_scale = num(value)?,
                "sparsity" => task.sparsity = value.parse::<Sparsity>()?,
                "gamma" => task.gamma = num(value)?,
                "transform" => task.transform = value.parse::<RewardTransform>()?,
                "cap" => task.episode_cap = int(value)?,
                other => return Err(err(format!("unknown task key '{other}'"))),
            }
        }
        Self::new(name, tasks)
    }

    /// Serializes in the format accepted by [`Suite::parse`].
    pub fn to_config_string(&self) -> String {
        let mut out = format!("name = {}\n", self.name);
        for t in &self.tasks {
            out.push_str("[task]\n");
            let _ = writeln!(out, "family = {}", t.family);
            match t.family {
                Family::Grid => {
                    let _ = writeln!(out, "width = {}\nheight = {}", t.width, t.height);
                    if !t.walls.is_empty() {
                        let cells: Vec<String> =
                            t.walls.iter().map(|(x, y)| format!("{x}:{y}")).collect();
                        let _ = writeln!(out, "walls = {}", cells.join(" "));
                    }
                }
                _ => {
                    let _ = writeln!(out, "length = {}", t.length);
                }
            }
            let _ = writeln!(
                out,
                "scale = {}\nsparsity = {}\ngamma = {}\ntransform = {}\ncap = {}",
                t.reward_scale, t.sparsity, t.gamma, t.transform, t.episode_cap
            );
        }
        out
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn make_env(&self, task: usize, seed: u64) -> Result<EnvInstance> {
        let spec = self.tasks.get(task).ok_or(Error::TaskOutOfRange {
            task,
            tasks: self.tasks.len(),
        })?;
        EnvInstance::new(spec.clone(), self.obs_dim, seed)
    }
}
