//! CSV tables: aggregate results, per-task breakdowns and PBT fitness history.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::Path;

use super::pbt::FitnessRow;
use super::scores::ScoreRecord;
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 4] = ["variant", "suite", "median_normalized", "mean_capped"];
pub const BREAKDOWN_HEADER: [&str; 6] =
    ["task_id", "raw_return", "random_ref", "optimal_ref", "normalized", "capped"];
pub const FITNESS_HEADER: [&str; 9] = [
    "interval",
    "member_id",
    "fitness",
    "frames",
    "learning_rate",
    "entropy_cost",
    "rmsprop_epsilon",
    "max_grad_norm",
    "copied_from",
];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub variant: String,
    pub suite: String,
    pub median_normalized: f64,
    pub mean_capped: f64,
}

/// Appends to `path`, writing the header if the file is new or empty.
pub fn append_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    }
    for r in rows {
        w.write_record([
            r.variant.clone(),
            r.suite.clone(),
            r.median_normalized.to_string(),
            r.mean_capped.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn check_header(reader: &mut csv::Reader<std::fs::File>, expected: &[&str], path: &Path) -> Result<()> {
    let header = reader.headers().map_err(csv_err)?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Config(format!(
            "{}: expected header {}",
            path.display(),
            expected.join(",")
        )));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::Config(format!("{}: bad value '{raw}' in column {i}", path.display())))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    check_header(&mut reader, &RESULTS_HEADER, path)?;
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(ResultRow {
                variant: field(&rec, 0, path)?,
                suite: field(&rec, 1, path)?,
                median_normalized: field(&rec, 2, path)?,
                mean_capped: field(&rec, 3, path)?,
            })
        })
        .collect()
}

pub fn write_breakdown(path: &Path, records: &[ScoreRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(BREAKDOWN_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.task_id.to_string(),
            r.raw_return.to_string(),
            r.random_ref.to_string(),
            r.optimal_ref.to_string(),
            r.normalized.to_string(),
            r.capped.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_breakdown(path: &Path) -> Result<Vec<ScoreRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    check_header(&mut reader, &BREAKDOWN_HEADER, path)?;
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(ScoreRecord {
                task_id: field(&rec, 0, path)?,
                raw_return: field(&rec, 1, path)?,
                random_ref: field(&rec, 2, path)?,
                optimal_ref: field(&rec, 3, path)?,
                normalized: field(&rec, 4, path)?,
                capped: field(&rec, 5, path)?,
            })
        })
        .collect()
}

pub fn write_fitness_history(path: &Path, rows: &[FitnessRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(FITNESS_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.interval.to_string(),
            r.member_id.to_string(),
            r.fitness.to_string(),
            r.frames.to_string(),
            r.hyper.learning_rate.to_string(),
            r.hyper.entropy_cost.to_string(),
            r.hyper.rmsprop_epsilon.to_string(),
            r.hyper.max_grad_norm.to_string(),
            r.copied_from.map_or(String::new(), |d| d.to_string()),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean of each metric over all rows sharing a (variant, suite) pair, with
/// the number of rows that went into it.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub suite: String,
    pub runs: usize,
    pub median_normalized: f64,
    pub mean_capped: f64,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.suite.clone(), r.variant.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((suite, variant), rs)| {
            let n = rs.len() as f64;
            SummaryRow {
                variant,
                suite,
                runs: rs.len(),
                median_normalized: rs.iter().map(|r| r.median_normalized).sum::<f64>() / n,
                mean_capped: rs.iter().map(|r| r.mean_capped).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Fixed-width table of [`summarize`] output.
pub fn render_table(summary: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<12} {:<12} {:>5} {:>18} {:>12}\n",
        "suite", "variant", "runs", "median_normalized", "mean_capped"
    );
    for s in summary {
        out.push_str(&format!(
            "{:<12} {:<12} {:>5} {:>18.3} {:>12.3}\n",
            s.suite, s.variant, s.runs, s.median_normalized, s.mean_capped
        ));
    }
    out
}
