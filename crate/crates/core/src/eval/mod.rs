//! Tracking metrics and the experiment sweeps built on them.
//!
//! Predictions and ground truth are sequences of `(timestamp, zone)` sorted
//! by time. Two metrics are latency tolerant: a prediction is accurate if its
//! zone occurs anywhere in the truth within `±window` seconds, and a
//! predicted zone change is correct only if the same change occurs in the
//! truth within `±window` and has not already been claimed by an earlier
//! prediction.

mod sweep;

pub use sweep::{
    ablate_sensors, sweep_history_length, sweep_k, sweep_sensor_density, walk_report, zone_accuracy_report, Axis, SweepPoint,
    SweepResult,
};

use thiserror::Error;

use crate::zone_graph::{ZoneGraph, ZoneId};

/// Latency tolerance of both metrics, in seconds.
pub const DEFAULT_WINDOW_S: f64 = 10.0;

/// Slack when comparing timestamps against window edges.
const TIME_EPS: f64 = 1e-9;

pub type Labeled = (f64, ZoneId);

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no predictions to score")]
    Empty,
    #[error("prediction and truth are not aligned at step {0}")]
    Misaligned(usize),
    #[error("zones {0} and {1} are not connected")]
    Unreachable(ZoneId, ZoneId),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Net(#[from] crate::net::NetError),
    #[error(transparent)]
    Tracker(#[from] crate::tracker::TrackerError),
}

/// Index range of `truth` with timestamps in `[t - window, t + window]`.
fn window_range(truth: &[Labeled], t: f64, window: f64) -> std::ops::Range<usize> {
    let lo = truth.partition_point(|s| s.0 < t - window - TIME_EPS);
    let hi = truth.partition_point(|s| s.0 <= t + window + TIME_EPS);
    lo..hi.max(lo)
}

/// Fraction of predictions whose zone occurs in the truth within `±window`.
pub fn accuracy_star(pred: &[Labeled], truth: &[Labeled], window: f64) -> Result<f64, EvalError> {
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(star_hits(pred, truth, window) as f64 / pred.len() as f64)
}

fn star_hits(pred: &[Labeled], truth: &[Labeled], window: f64) -> usize {
    pred.iter()
        .filter(|&&(t, z)| truth[window_range(truth, t, window)].iter().any(|s| s.1 == z))
        .count()
}

/// A zone change: the first sample in `to` after a run in `from`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneChange {
    pub timestamp: f64,
    pub from: ZoneId,
    pub to: ZoneId,
}

pub fn zone_changes(seq: &[Labeled]) -> Vec<ZoneChange> {
    seq.windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| ZoneChange { timestamp: w[1].0, from: w[0].1, to: w[1].1 })
        .collect()
}

/// `(incorrect, total)` predicted zone changes.
///
/// Predicted changes are matched greedily in time order, each to the
/// earliest unmatched truth change with the same `from -> to` within
/// `±window`. Unmatched predicted changes are incorrect.
pub fn incorrect_zone_changes(pred: &[Labeled], truth: &[Labeled], window: f64) -> Result<(usize, usize), EvalError> {
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let predicted = zone_changes(pred);
    let actual = zone_changes(truth);
    let mut used = vec![false; actual.len()];
    let mut incorrect = 0;
    for c in &predicted {
        let lo = actual.partition_point(|a| a.timestamp < c.timestamp - window - TIME_EPS);
        let found = actual[lo..]
            .iter()
            .enumerate()
            .take_while(|(_, a)| a.timestamp <= c.timestamp + window + TIME_EPS)
            .find(|&(i, a)| !used[lo + i] && a.from == c.from && a.to == c.to);
        match found {
            Some((i, _)) => used[lo + i] = true,
            None => incorrect += 1,
        }
    }
    Ok((incorrect, predicted.len()))
}

/// Hop distance between prediction and truth over misclassified steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDistance {
    /// Sum of hop distances over misclassified steps.
    pub total: u64,
    pub misclassified: usize,
}

impl ErrorDistance {
    /// `None` when nothing was misclassified.
    pub fn mean(&self) -> Option<f64> {
        (self.misclassified > 0).then(|| self.total as f64 / self.misclassified as f64)
    }
}

pub fn error_distance(pred: &[Labeled], truth: &[Labeled], g: &ZoneGraph) -> Result<ErrorDistance, EvalError> {
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    if pred.len() != truth.len() {
        return Err(EvalError::Misaligned(pred.len().min(truth.len())));
    }
    let mut out = ErrorDistance { total: 0, misclassified: 0 };
    for (i, (p, t)) in pred.iter().zip(truth).enumerate() {
        if (p.0 - t.0).abs() > TIME_EPS {
            return Err(EvalError::Misaligned(i));
        }
        if p.1 != t.1 {
            let d = g.distance(p.1, t.1).ok_or(EvalError::Unreachable(p.1, t.1))?;
            out.total += u64::from(d);
            out.misclassified += 1;
        }
    }
    Ok(out)
}

/// Mean hop distance over misclassified steps, 0 if there are none.
pub fn mean_error_distance(pred: &[Labeled], truth: &[Labeled], g: &ZoneGraph) -> Result<f64, EvalError> {
    Ok(error_distance(pred, truth, g)?.mean().unwrap_or(0.0))
}

/// Metrics pooled over a set of scored sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Exact per-step accuracy.
    pub accuracy: f64,
    pub accuracy_star: f64,
    pub incorrect_zone_changes: usize,
    pub total_zone_changes: usize,
    pub sequences: usize,
    pub error: ErrorDistance,
    /// Exact accuracy per truth zone; `None` for zones never visited.
    pub per_zone_accuracy: Vec<Option<f64>>,
}

impl MetricReport {
    /// Scores aligned `(prediction, truth)` pairs with the given tolerance.
    pub fn score(pairs: &[(Vec<Labeled>, Vec<Labeled>)], g: &ZoneGraph, window: f64) -> Result<Self, EvalError> {
        let steps: usize = pairs.iter().map(|(p, _)| p.len()).sum();
        if steps == 0 {
            return Err(EvalError::Empty);
        }
        let zones = g.zone_count();
        let (mut hits, mut star) = (0usize, 0usize);
        let (mut incorrect, mut total) = (0, 0);
        let mut error = ErrorDistance { total: 0, misclassified: 0 };
        let mut per_zone = vec![(0usize, 0usize); zones];
        for (pred, truth) in pairs {
            if pred.is_empty() {
                continue;
            }
            star += star_hits(pred, truth, window);
            let (i, t) = incorrect_zone_changes(pred, truth, window)?;
            incorrect += i;
            total += t;
            let e = error_distance(pred, truth, g)?;
            error.total += e.total;
            error.misclassified += e.misclassified;
            for (p, t) in pred.iter().zip(truth) {
                let z = &mut per_zone[t.1 .0];
                z.1 += 1;
                if p.1 == t.1 {
                    z.0 += 1;
                    hits += 1;
                }
            }
        }
        Ok(MetricReport {
            accuracy: hits as f64 / steps as f64,
            accuracy_star: star as f64 / steps as f64,
            incorrect_zone_changes: incorrect,
            total_zone_changes: total,
            sequences: pairs.len(),
            error,
            per_zone_accuracy: per_zone.into_iter().map(|(h, n)| (n > 0).then(|| h as f64 / n as f64)).collect(),
        })
    }

    /// Incorrect zone changes averaged over scored sequences.
    pub fn incorrect_per_sequence(&self) -> f64 {
        self.incorrect_zone_changes as f64 / self.sequences.max(1) as f64
    }

    pub fn mean_error_distance(&self) -> Option<f64> {
        self.error.mean()
    }
}
