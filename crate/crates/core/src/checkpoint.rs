//! Plain-text checkpoints.
//!
//! ```text
//! popart-checkpoint 1
//! variant popart
//! suite scale6
//! progress <steps> <frames>
//! arch <obs_dim> <hidden> <actions> <heads>
//! version <params version>
//! tensor trunk.w <len>
//! <len values, space separated, row-major>
//! ...                       (all six parameter blocks)
//! accum trunk.w <len>
//! <len values>
//! ...                       (optimizer state, same blocks)
//! rejected <count>
//! stats <tasks>
//! <mu> <nu> <beta> <sigma_lo> <sigma_hi>   (one line per task)
//! ```
//!
//! Floats are written in shortest round-trip form, so write then read is exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::approximator::{Architecture, ParamSet, BLOCK_NAMES};
use crate::config::Variant;
use crate::error::{Error, Result};
use crate::runtime::LearnerState;
use crate::{NormStats, Optimizer, Params, TaskStats};

const MAGIC: &str = "popart-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub variant: Variant,
    pub suite: String,
    pub steps: u64,
    pub frames: u64,
    pub state: LearnerState,
}

fn write_block(out: &mut String, tag: &str, name: &str, values: &[f64]) {
    let _ = writeln!(out, "{tag} {name} {}", values.len());
    let line: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        loop {
            let (i, line) = self
                .inner
                .next()
                .ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
            self.last = i + 1;
            if !line.trim().is_empty() {
                return Ok(line.trim());
            }
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Checkpoint(format!("line {}: {msg}", self.last))
    }

    /// Reads `keyword v1 v2 ...` and returns the values.
    fn keyed(&mut self, keyword: &str, count: usize) -> Result<Vec<&'a str>> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(self.err(format!("expected '{keyword}', got '{line}'")));
        }
        let values: Vec<&str> = parts.collect();
        if values.len() != count {
            return Err(self.err(format!("'{keyword}' takes {count} fields")));
        }
        Ok(values)
    }

    fn int<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("bad integer '{s}'")))
    }

    fn floats(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = if expected == 0 { "" } else { self.next()? };
        let values = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| self.err(format!("bad number '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != expected {
            return Err(self.err(format!("expected {expected} values, got {}", values.len())));
        }
        Ok(values)
    }

    fn block(&mut self, tag: &str, name: &str, expected: usize) -> Result<Vec<f64>> {
        let f = self.keyed(tag, 2)?;
        if f[0] != name {
            return Err(self.err(format!("expected block '{name}', got '{}'", f[0])));
        }
        let len: usize = self.int(f[1])?;
        if len != expected {
            return Err(self.err(format!("block '{name}' has {len} values, expected {expected}")));
        }
        self.floats(len)
    }

    fn param_set(&mut self, tag: &str, arch: Architecture) -> Result<ParamSet<f64>> {
        let mut set = ParamSet::zeros(arch);
        for (name, block) in BLOCK_NAMES.iter().zip(set.blocks_mut()) {
            let expected = block.len();
            *block = self.block(tag, name, expected)?;
        }
        Ok(set)
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let params = &self.state.params;
        let a = params.arch();
        let mut out = format!(
            "{MAGIC}\nvariant {}\nsuite {}\nprogress {} {}\narch {} {} {} {}\nversion {}\n",
            self.variant, self.suite, self.steps, self.frames, a.obs_dim, a.hidden, a.actions, a.heads,
            params.version
        );
        for (name, block) in BLOCK_NAMES.iter().zip(params.weights.blocks()) {
            write_block(&mut out, "tensor", name, block);
        }
        for (name, block) in BLOCK_NAMES.iter().zip(self.state.optimizer.accum.blocks()) {
            write_block(&mut out, "accum", name, block);
        }
        let _ = writeln!(out, "rejected {}", self.state.optimizer.rejected_steps);
        let _ = writeln!(out, "stats {}", self.state.stats.len());
        for s in self.state.stats.iter() {
            let _ = writeln!(out, "{} {} {} {} {}", s.mu, s.nu, s.beta, s.sigma_lo, s.sigma_hi);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
            last: 0,
        };
        if lines.next()? != MAGIC {
            return Err(lines.err("not a checkpoint file"));
        }
        let variant: Variant = lines.keyed("variant", 1)?[0].parse()?;
        let suite = lines.keyed("suite", 1)?[0].to_string();
        let p = lines.keyed("progress", 2)?;
        let (steps, frames) = (lines.int(p[0])?, lines.int(p[1])?);
        let a = lines.keyed("arch", 4)?;
        let arch = Architecture {
            obs_dim: lines.int(a[0])?,
            hidden: lines.int(a[1])?,
            actions: lines.int(a[2])?,
            heads: lines.int(a[3])?,
        };
        let v = lines.keyed("version", 1)?;
        let version = lines.int(v[0])?;
        let weights = lines.param_set("tensor", arch)?;
        let accum = lines.param_set("accum", arch)?;
        let r = lines.keyed("rejected", 1)?;
        let rejected_steps = lines.int(r[0])?;
        let t = lines.keyed("stats", 1)?;
        let tasks: usize = lines.int(t[0])?;
        let mut stats = Vec::with_capacity(tasks);
        for _ in 0..tasks {
            let f = lines.floats(5)?;
            let s = NormStats {
                mu: f[0],
                nu: f[1],
                beta: f[2],
                sigma_lo: f[3],
                sigma_hi: f[4],
            };
            if !s.is_valid() {
                return Err(lines.err("invalid statistics"));
            }
            stats.push(s);
        }
        Ok(Self {
            variant,
            suite,
            steps,
            frames,
            state: LearnerState {
                params: Params { weights, version },
                stats: TaskStats::from_vec(stats),
                optimizer: Optimizer {
                    accum,
                    rejected_steps,
                },
            },
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        // Write-then-rename so an interrupted write never clobbers a good file.
        let tmp = path.with_extension("ckpt.tmp");
        std::fs::write(&tmp, self.to_text())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Hyperparams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let arch = Architecture {
            obs_dim: 5,
            hidden: 3,
            actions: 4,
            heads: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut state = LearnerState::new(Params::init(arch, &mut rng), 2, &Hyperparams::default());
        state.params.version = 17;
        state.params.weights.value_b = vec![0.1 + 0.2, -1e-300];
        state.optimizer.accum.trunk_w[2] = 3.5e-9;
        let s = state.stats.get(1).unwrap().with_moments(12.25, 400.0);
        state.stats.set(1, s).unwrap();
        Checkpoint {
            variant: Variant::PopArt,
            suite: "scale6".into(),
            steps: 17,
            frames: 2720,
            state,
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let c = sample();
        assert_eq!(Checkpoint::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let c = sample();
        c.write(&path).unwrap();
        assert_eq!(Checkpoint::read(&path).unwrap(), c);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let text = sample().to_text();
        assert!(Checkpoint::parse("hello").is_err());
        assert!(Checkpoint::parse(&text.replace("tensor policy.b 4", "tensor policy.b 5")).is_err());
        assert!(Checkpoint::parse(&text.replace("variant popart", "variant nope")).is_err());
        let truncated: String = text.lines().take(9).collect::<Vec<_>>().join("\n");
        assert!(Checkpoint::parse(&truncated).is_err());
        assert!(Checkpoint::read(Path::new("/no/such/file.ckpt")).is_err());
    }
}
