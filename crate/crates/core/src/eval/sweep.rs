use std::fmt::{self, Write as _};
use std::sync::Arc;

use rand::seq::SliceRandom;

use super::{EvalError, Labeled, MetricReport, DEFAULT_WINDOW_S};
use crate::benchmark::{Benchmark, Recipe};
use crate::records::Recording;
use crate::dataset::LabeledTrajectory;
use crate::net::{argmax, predict_last, NetParams};
use crate::posterior::ConstraintParams;
use crate::rng::{self, Stream};
use crate::tracker::{run_offline, TrackerConfig};
use crate::zone_graph::{ZoneGraph, ZoneId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Lookback,
    K,
    Density,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Lookback => "lookback",
            Axis::K => "k",
            Axis::Density => "density",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    /// Lookback the point was evaluated with.
    pub lookback: usize,
    pub report: MetricReport,
}

impl SweepPoint {
    /// One line of [`SweepResult::CSV_HEADER`] layout, newline included.
    pub fn csv_row(&self, axis: &str) -> String {
        let r = &self.report;
        let med = r.mean_error_distance().map(|d| d.to_string()).unwrap_or_default();
        format!(
            "{axis},{},{},{},{},{},{},{},{med}\n",
            self.value,
            self.lookback,
            r.accuracy,
            r.accuracy_star,
            r.incorrect_zone_changes,
            r.incorrect_per_sequence(),
            r.total_zone_changes,
        )
    }
}

/// Points ordered by lookback, then by strictly increasing axis value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub const CSV_HEADER: &'static str = "axis,value,lookback,accuracy,accuracy_star,incorrect_changes,\
                                          incorrect_per_sequence,total_changes,mean_error_distance";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&p.csv_row(&self.axis.to_string()));
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:>10} {:>8} {:>9} {:>9} {:>10} {:>9} {:>9}\n",
            self.axis.to_string(),
            "lookback",
            "accuracy",
            "accuracy*",
            "incorrect",
            "per-seq",
            "err-dist"
        );
        for p in &self.points {
            let r = &p.report;
            let med = r.mean_error_distance().map(|d| format!("{d:.3}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:>10} {:>8} {:>9.4} {:>9.4} {:>10} {:>9.2} {:>9}",
                p.value,
                p.lookback,
                r.accuracy,
                r.accuracy_star,
                r.incorrect_zone_changes,
                r.incorrect_per_sequence(),
                med
            );
        }
        out
    }

    pub fn point(&self, value: f64, lookback: usize) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.value == value && p.lookback == lookback)
    }
}

fn strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    !v.is_empty() && v.windows(2).all(|w| w[0] < w[1])
}

/// Scores single-zone trajectories step by step.
///
/// The decision at step `t >= start` replays the network over the `lookback`
/// steps ending at `t`; there is no posterior constraint. Every trajectory
/// becomes one scored sequence with constant truth.
pub fn zone_accuracy_report(
    params: &NetParams,
    test: &[LabeledTrajectory],
    g: &ZoneGraph,
    lookback: usize,
    start: usize,
) -> Result<MetricReport, EvalError> {
    if lookback == 0 || start + 1 < lookback {
        return Err(EvalError::Sweep(format!("lookback {lookback} does not fit before step {start}")));
    }
    let pairs: Vec<(Vec<Labeled>, Vec<Labeled>)> = test
        .iter()
        .map(|traj| {
            let inputs = traj.inputs();
            let labels = traj.labels();
            (start..traj.len())
                .map(|t| {
                    let probs = predict_last(params, &inputs[t + 1 - lookback..=t]);
                    let ts = traj.steps[t].timestamp;
                    ((ts, ZoneId(argmax(&probs))), (ts, labels[t]))
                })
                .unzip()
        })
        .collect();
    MetricReport::score(&pairs, g, DEFAULT_WINDOW_S)
}

/// Per-zone accuracy as a function of lookback.
///
/// Every length is scored on the same steps, those with at least
/// `max(lengths)` steps of history.
pub fn sweep_history_length(
    params: &NetParams,
    test: &[LabeledTrajectory],
    g: &ZoneGraph,
    lengths: &[usize],
) -> Result<SweepResult, EvalError> {
    if !strictly_increasing(lengths) || lengths[0] == 0 {
        return Err(EvalError::Sweep("lookbacks must be positive and strictly increasing".into()));
    }
    let start = lengths[lengths.len() - 1] - 1;
    if let Some(t) = test.iter().find(|t| t.len() <= start) {
        return Err(EvalError::Sweep(format!("test trajectory of {} steps is too short", t.len())));
    }
    let points = lengths
        .iter()
        .map(|&l| {
            let report = zone_accuracy_report(params, test, g, l, start)?;
            Ok(SweepPoint { value: l as f64, lookback: l, report })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(SweepResult { axis: Axis::Lookback, points })
}

/// Sensors kept at `density` sensors per zone.
///
/// Full density keeps every sensor in layout order. Lower densities keep a
/// prefix of one seeded permutation, so sparser layouts are subsets of
/// denser ones.
pub fn ablate_sensors(sensors: usize, zones: usize, density: f64, seed: u64) -> Result<Vec<usize>, EvalError> {
    let keep = (density * zones as f64).round();
    if !(keep >= 1.0) {
        return Err(EvalError::Sweep(format!("density {density} leaves no sensors for {zones} zones")));
    }
    let keep = keep as usize;
    if keep > sensors {
        return Err(EvalError::Sweep(format!(
            "density {density} needs {keep} sensors, the layout has {sensors}"
        )));
    }
    let mut order: Vec<usize> = (0..sensors).collect();
    if keep < sensors {
        order.shuffle(&mut rng::stream(seed, Stream::Ablation));
        order.truncate(keep);
        order.sort_unstable();
    }
    Ok(order)
}

/// Retrains at each sensor density and scores per-zone accuracy at the
/// recipe's lookback.
pub fn sweep_sensor_density(
    bench: &Benchmark,
    recipe: &Recipe,
    densities: &[f64],
    seed: u64,
) -> Result<SweepResult, EvalError> {
    if !strictly_increasing(densities) {
        return Err(EvalError::Sweep("densities must be strictly increasing".into()));
    }
    let lookback = recipe.net.lookback;
    let mut points = Vec::with_capacity(densities.len());
    for &d in densities {
        let sensors = ablate_sensors(bench.sensor_count(), bench.graph.zone_count(), d, seed)?;
        let model = bench.train(&sensors, recipe).map_err(|e| match e {
            crate::benchmark::BenchmarkError::Net(e) => EvalError::Net(e),
            crate::benchmark::BenchmarkError::Dataset(e) => EvalError::Dataset(e),
            e => EvalError::Sweep(e.to_string()),
        })?;
        let report = zone_accuracy_report(model.params(), &model.test, &bench.graph, lookback, lookback - 1)?;
        points.push(SweepPoint { value: d, lookback, report });
    }
    Ok(SweepResult { axis: Axis::Density, points })
}

/// Tracks every walk and scores decisions against the truth at decision times.
///
/// Walk frames must already carry only the sensors the model was trained on.
pub fn walk_report(
    params: &Arc<NetParams>,
    graph: &Arc<ZoneGraph>,
    config: TrackerConfig,
    walks: &[Recording],
) -> Result<MetricReport, EvalError> {
    let mut pairs = Vec::with_capacity(walks.len());
    for w in walks {
        let decisions = run_offline(params.clone(), graph.clone(), config, &w.frames)?;
        let (pred, truth): (Vec<Labeled>, Vec<Labeled>) = decisions
            .iter()
            .filter_map(|d| w.zone_at(d.timestamp).map(|z| ((d.timestamp, d.zone), (d.timestamp, z))))
            .unzip();
        pairs.push((pred, truth));
    }
    MetricReport::score(&pairs, graph, DEFAULT_WINDOW_S)
}

/// Tracker metrics over the `lookbacks x ks` grid.
pub fn sweep_k(
    params: &Arc<NetParams>,
    graph: &Arc<ZoneGraph>,
    base: TrackerConfig,
    walks: &[Recording],
    ks: &[f64],
    lookbacks: &[usize],
) -> Result<SweepResult, EvalError> {
    if !strictly_increasing(ks) || !strictly_increasing(lookbacks) {
        return Err(EvalError::Sweep("k values and lookbacks must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(ks.len() * lookbacks.len());
    for &lookback in lookbacks {
        for &k in ks {
            let constraint = ConstraintParams::new(k, base.constraint.delta_t).map_err(|e| EvalError::Sweep(e.to_string()))?;
            let config = TrackerConfig { constraint, lookback, ..base };
            let report = walk_report(params, graph, config, walks)?;
            points.push(SweepPoint { value: k, lookback, report });
        }
    }
    Ok(SweepResult { axis: Axis::K, points })
}
