use crate::error::{Error, Result};

/// Score of one task against its random and optimal references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRecord {
    pub task_id: usize,
    pub raw_return: f64,
    pub random_ref: f64,
    pub optimal_ref: f64,
    pub normalized: f64,
    pub capped: f64,
}

impl ScoreRecord {
    pub fn new(task_id: usize, raw_return: f64, random_ref: f64, optimal_ref: f64) -> Result<Self> {
        let normalized = normalized_score(raw_return, random_ref, optimal_ref)?;
        Ok(Self {
            task_id,
            raw_return,
            random_ref,
            optimal_ref,
            normalized,
            capped: capped(normalized),
        })
    }
}

/// `(raw - random) / (optimal - random)`.
pub fn normalized_score(raw: f64, random_ref: f64, optimal_ref: f64) -> Result<f64> {
    let span = optimal_ref - random_ref;
    if span == 0.0 || !span.is_finite() {
        return Err(Error::UndefinedNormalization(span));
    }
    Ok((raw - random_ref) / span)
}

pub fn capped(normalized: f64) -> f64 {
    normalized.min(1.0)
}

/// Median normalized score and mean capped score over a set of tasks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub median_normalized: f64,
    pub mean_capped: f64,
}

pub fn aggregate(records: &[ScoreRecord]) -> Result<Aggregate> {
    if records.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut normalized: Vec<f64> = records.iter().map(|r| r.normalized).collect();
    normalized.sort_by(f64::total_cmp);
    let mid = normalized.len() / 2;
    let median_normalized = if normalized.len() % 2 == 1 {
        normalized[mid]
    } else {
        0.5 * (normalized[mid - 1] + normalized[mid])
    };
    let mean_capped = records.iter().map(|r| r.capped).sum::<f64>() / records.len() as f64;
    Ok(Aggregate {
        median_normalized,
        mean_capped,
    })
}
