//! Append-only CSV stream with one row per learner step.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::runtime::StepMetrics;

pub fn metrics_header(tasks: usize) -> Vec<String> {
    let mut h = vec!["step".to_string(), "frames_total".to_string()];
    for t in 0..tasks {
        h.push(format!("return_{t}"));
        h.push(format!("mu_{t}"));
        h.push(format!("sigma_{t}"));
    }
    for c in [
        "policy_loss",
        "value_loss",
        "entropy",
        "grad_norm",
        "queue_depth",
        "staleness",
        "skipped",
    ] {
        h.push(c.to_string());
    }
    h
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub struct MetricsWriter<W: Write> {
    out: csv::Writer<W>,
    tasks: usize,
}

impl MetricsWriter<File> {
    pub fn create(path: &Path, tasks: usize) -> Result<Self> {
        Self::new(File::create(path)?, tasks)
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(sink: W, tasks: usize) -> Result<Self> {
        let mut out = csv::Writer::from_writer(sink);
        out.write_record(metrics_header(tasks)).map_err(csv_err)?;
        Ok(Self { out, tasks })
    }

    pub fn write(&mut self, m: &StepMetrics) -> Result<()> {
        if m.mu.len() != self.tasks {
            return Err(Error::LengthMismatch {
                what: "metrics tasks",
                expected: self.tasks,
                got: m.mu.len(),
            });
        }
        let mut row = vec![m.step.to_string(), m.frames_total.to_string()];
        for t in 0..self.tasks {
            row.push(m.episode_return_mean[t].map_or(String::new(), |r| r.to_string()));
            row.push(m.mu[t].to_string());
            row.push(m.sigma[t].to_string());
        }
        row.extend([
            m.policy_loss.to_string(),
            m.value_loss.to_string(),
            m.entropy.to_string(),
            m.grad_norm.to_string(),
            m.queue_depth.to_string(),
            m.staleness.to_string(),
            u8::from(m.skipped).to_string(),
        ]);
        self.out.write_record(row).map_err(csv_err)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.out
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}
