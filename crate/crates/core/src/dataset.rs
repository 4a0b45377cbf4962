//! From raw frames to network inputs.
//!
//! Frames are grouped into trailing windows `(b - dt, b]` on a fixed grid of
//! boundaries `b = k * dt`, averaged per sensor, imputed and scaled into
//! `[0, 1]`. Single-zone recordings are spliced pairwise across adjacent
//! zones to synthesize cross-zone training trajectories.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};
use crate::signal_sim::RssiFrame;
use crate::zone_graph::{ZoneGraph, ZoneId};

/// Frames older than the newest seen by more than this are dropped.
pub const REORDER_TOLERANCE_S: f64 = 0.05;

const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("zone {zone} recording of tag {tag} has {len} steps, fewer than {needed}")]
    ShortRecording { tag: usize, zone: ZoneId, len: usize, needed: usize },
    #[error("need at least 2 tags to split, got {0}")]
    TooFewTags(usize),
    #[error("invalid trajectory: {0}")]
    Trajectory(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Per-sensor mean over the non-missing readings of `frames`.
///
/// A sensor with no reading stays `None`; an empty frame list yields an
/// all-missing vector.
pub fn temporal_average(frames: &[RssiFrame], sensors: usize) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; sensors];
    let mut count = vec![0u32; sensors];
    for f in frames {
        for (i, v) in f.values.iter().enumerate().take(sensors) {
            if let Some(v) = v {
                sum[i] += v;
                count[i] += 1;
            }
        }
    }
    sum.into_iter().zip(count).map(|(s, c)| (c > 0).then(|| s / c as f64)).collect()
}

/// Linear scaling of dBm into `[0, 1]` with missing readings at the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub floor_dbm: f64,
    pub ceil_dbm: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { floor_dbm: -100.0, ceil_dbm: -30.0 }
    }
}

impl Normalization {
    pub fn new(floor_dbm: f64, ceil_dbm: f64) -> Result<Self, DatasetError> {
        if !(floor_dbm < ceil_dbm) {
            return Err(DatasetError::Argument(format!("floor {floor_dbm} dBm not below ceiling {ceil_dbm} dBm")));
        }
        Ok(Normalization { floor_dbm, ceil_dbm })
    }

    pub fn apply(&self, v: &[Option<f64>]) -> Vec<f64> {
        impute_and_normalize(v, self.floor_dbm, self.ceil_dbm)
    }
}

pub fn impute_and_normalize(v: &[Option<f64>], floor_dbm: f64, ceil_dbm: f64) -> Vec<f64> {
    let span = ceil_dbm - floor_dbm;
    v.iter()
        .map(|x| ((x.unwrap_or(floor_dbm) - floor_dbm) / span).clamp(0.0, 1.0))
        .collect()
}

/// Grid index of the window containing `t`: window `k` covers `((k-1)dt, k dt]`.
pub fn window_index(t: f64, dt: f64) -> i64 {
    (t / dt - BOUNDARY_EPS).ceil() as i64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedWindow {
    pub end: f64,
    pub average: Vec<Option<f64>>,
}

/// Incremental trailing-window averager.
///
/// A window closes when a frame lands exactly on its end boundary or when a
/// frame from a later window arrives. Windows skipped entirely by a gap
/// close as all-missing, so exactly one window closes per elapsed `dt`.
#[derive(Debug, Clone)]
pub struct Windower {
    dt: f64,
    sensors: usize,
    current: Option<i64>,
    buffer: Vec<RssiFrame>,
    newest: f64,
    dropped: usize,
}

impl Windower {
    pub fn new(dt: f64, sensors: usize) -> Self {
        Windower { dt, sensors, current: None, buffer: Vec::new(), newest: f64::NEG_INFINITY, dropped: 0 }
    }

    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn push(&mut self, frame: RssiFrame) -> Vec<ClosedWindow> {
        let mut closed = Vec::new();
        if frame.timestamp < self.newest - REORDER_TOLERANCE_S || !frame.timestamp.is_finite() {
            self.dropped += 1;
            return closed;
        }
        let w = window_index(frame.timestamp, self.dt);
        let mut current = *self.current.get_or_insert(w);
        while w > current {
            closed.push(self.close(current));
            current += 1;
        }
        self.newest = self.newest.max(frame.timestamp);
        let on_boundary = w == current && (frame.timestamp - w as f64 * self.dt).abs() <= BOUNDARY_EPS;
        self.buffer.push(frame);
        if on_boundary {
            closed.push(self.close(current));
            current += 1;
        }
        self.current = Some(current);
        closed
    }

    fn close(&mut self, index: i64) -> ClosedWindow {
        let average = temporal_average(&self.buffer, self.sensors);
        self.buffer.clear();
        ClosedWindow { end: index as f64 * self.dt, average }
    }
}

/// One averaged, normalized input step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedStep {
    pub timestamp: f64,
    pub x: Vec<f64>,
    pub label: Option<ZoneId>,
}

/// Averages and normalizes a full recording, labeling every step with `label`.
pub fn steps_from_frames(
    frames: &[RssiFrame],
    sensors: usize,
    dt: f64,
    norm: &Normalization,
    label: Option<ZoneId>,
) -> Vec<AveragedStep> {
    let mut w = Windower::new(dt, sensors);
    frames
        .iter()
        .flat_map(|f| w.push(f.clone()))
        .map(|c| AveragedStep { timestamp: c.end, x: norm.apply(&c.average), label })
        .collect()
}

/// Where an augmented trajectory's two halves came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splice {
    pub tag: usize,
    pub from: ZoneId,
    pub from_start: usize,
    pub to: ZoneId,
    pub to_start: usize,
}

/// Labeled sequence of averaged steps spaced exactly `dt` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTrajectory {
    pub steps: Vec<AveragedStep>,
    pub splice: Option<Splice>,
}

impl LabeledTrajectory {
    pub fn new(steps: Vec<AveragedStep>, dt: f64) -> Result<Self, DatasetError> {
        if steps.is_empty() {
            return Err(DatasetError::Trajectory("empty".into()));
        }
        if steps.iter().any(|s| s.label.is_none()) {
            return Err(DatasetError::Trajectory("unlabeled step".into()));
        }
        for pair in steps.windows(2) {
            if ((pair[1].timestamp - pair[0].timestamp) - dt).abs() > 1e-9 {
                return Err(DatasetError::Trajectory(format!(
                    "steps at {} and {} are not {dt} s apart",
                    pair[0].timestamp, pair[1].timestamp
                )));
            }
        }
        Ok(LabeledTrajectory { steps, splice: None })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn inputs(&self) -> Vec<&[f64]> {
        self.steps.iter().map(|s| s.x.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<ZoneId> {
        self.steps.iter().map(|s| s.label.expect("labeled trajectory")).collect()
    }
}

/// Averaged single-zone recordings of one tag, indexed by zone.
pub type TagRecordings = Vec<Vec<AveragedStep>>;

/// Splices `half_len`-step slices of adjacent zones' recordings into
/// `2 * half_len`-step trajectories.
///
/// For every tag, every connected pair `(a, b)` in lexicographic order and
/// every repetition `r`, one trajectory goes `a -> b` when `r` is even and
/// `b -> a` when odd. Each half is a contiguous slice at a uniformly random
/// offset of the source recording.
pub fn augment_cross_zone<R: Rng + ?Sized>(
    recordings: &[TagRecordings],
    g: &ZoneGraph,
    half_len: usize,
    per_pair: usize,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<LabeledTrajectory>, DatasetError> {
    if half_len == 0 || per_pair == 0 {
        return Err(DatasetError::Argument("half length and repetitions must be at least 1".into()));
    }
    for (tag, rec) in recordings.iter().enumerate() {
        if rec.len() != g.zone_count() {
            return Err(DatasetError::Argument(format!(
                "tag {tag} has recordings for {} zones, building has {}",
                rec.len(),
                g.zone_count()
            )));
        }
        for zone in g.zones() {
            let len = rec[zone.0].len();
            if len < half_len {
                return Err(DatasetError::ShortRecording { tag, zone, len, needed: half_len });
            }
        }
    }

    let pairs = g.connected_pairs();
    let mut out = Vec::with_capacity(recordings.len() * pairs.len() * per_pair);
    for (tag, rec) in recordings.iter().enumerate() {
        for &(a, b) in pairs {
            for rep in 0..per_pair {
                let (from, to) = if rep % 2 == 0 { (a, b) } else { (b, a) };
                let from_start = rng.random_range(0..=rec[from.0].len() - half_len);
                let to_start = rng.random_range(0..=rec[to.0].len() - half_len);
                let first = &rec[from.0][from_start..from_start + half_len];
                let second = &rec[to.0][to_start..to_start + half_len];
                let steps = first
                    .iter()
                    .map(|s| (s, from))
                    .chain(second.iter().map(|s| (s, to)))
                    .enumerate()
                    .map(|(i, (s, label))| AveragedStep {
                        timestamp: (i + 1) as f64 * dt,
                        x: s.x.clone(),
                        label: Some(label),
                    })
                    .collect();
                out.push(LabeledTrajectory {
                    steps,
                    splice: Some(Splice { tag, from, from_start, to, to_start }),
                });
            }
        }
    }
    Ok(out)
}

/// Which tags train and which one validates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSplit {
    pub train: Vec<usize>,
    pub validation: usize,
}

/// Holds out one uniformly chosen tag for validation.
pub fn split_tags(tag_count: usize, seed: u64) -> Result<TagSplit, DatasetError> {
    if tag_count < 2 {
        return Err(DatasetError::TooFewTags(tag_count));
    }
    let mut tags: Vec<usize> = (0..tag_count).collect();
    tags.shuffle(&mut rng::stream(seed, Stream::Split));
    let validation = tags.pop().unwrap();
    tags.sort_unstable();
    Ok(TagSplit { train: tags, validation })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSplit {
    pub train: Vec<LabeledTrajectory>,
    pub validation: Vec<LabeledTrajectory>,
    pub test: Vec<LabeledTrajectory>,
}

/// Tag-level split followed by per-side augmentation; `test` is filled by
/// the caller from independently recorded data.
pub fn split<R: Rng + ?Sized>(
    recordings: &[TagRecordings],
    g: &ZoneGraph,
    half_len: usize,
    per_pair: usize,
    dt: f64,
    seed: u64,
    rng: &mut R,
) -> Result<(TagSplit, DatasetSplit), DatasetError> {
    let tags = split_tags(recordings.len(), seed)?;
    let train_recs: Vec<_> = tags.train.iter().map(|&t| recordings[t].clone()).collect();
    let train = augment_cross_zone(&train_recs, g, half_len, per_pair, dt, rng)?;
    let validation =
        augment_cross_zone(std::slice::from_ref(&recordings[tags.validation]), g, half_len, per_pair, dt, rng)?;
    Ok((tags, DatasetSplit { train, validation, test: Vec::new() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zone_graph::ZoneDef;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame(t: f64, v: Vec<Option<f64>>) -> RssiFrame {
        RssiFrame { timestamp: t, values: v }
    }

    #[test]
    fn averages() {
        let frames: Vec<_> = (0..10).map(|i| frame(i as f64 * 0.1, vec![Some(-60.0)])).collect();
        assert_eq!(temporal_average(&frames, 1), vec![Some(-60.0)]);
        let frames = vec![frame(0.1, vec![Some(-50.0), None]), frame(0.2, vec![Some(-70.0), None])];
        assert_eq!(temporal_average(&frames, 2), vec![Some(-60.0), None]);
        assert_eq!(temporal_average(&[], 3), vec![None, None, None]);
    }

    #[test]
    fn normalization_cases() {
        assert_eq!(impute_and_normalize(&[None, None], -100.0, -30.0), vec![0.0, 0.0]);
        assert_eq!(impute_and_normalize(&[Some(-30.0)], -100.0, -30.0), vec![1.0]);
        assert_eq!(impute_and_normalize(&[Some(-65.0)], -100.0, -30.0), vec![0.5]);
        assert_eq!(impute_and_normalize(&[Some(-5.0), Some(-120.0)], -100.0, -30.0), vec![1.0, 0.0]);
        assert!(Normalization::new(-30.0, -100.0).is_err());
    }

    #[test]
    fn windows_close_on_boundaries() {
        let mut w = Windower::new(1.0, 1);
        let mut closed = Vec::new();
        for i in 1..=10 {
            closed.extend(w.push(frame(i as f64 / 10.0, vec![Some(-50.0)])));
        }
        assert_eq!(closed.len(), 1);
        assert_eq!(closed[0].end, 1.0);
        // A gap of three windows closes the empty ones as missing.
        closed = w.push(frame(4.5, vec![Some(-40.0)]));
        assert_eq!(closed.iter().map(|c| c.end).collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
        assert!(closed.iter().all(|c| c.average == vec![None]));
        // Late beyond tolerance is dropped; within tolerance is kept.
        assert!(w.push(frame(4.4, vec![Some(-90.0)])).is_empty());
        assert_eq!(w.dropped(), 1);
        assert!(w.push(frame(4.47, vec![Some(-60.0)])).is_empty());
        let c = w.push(frame(5.0, vec![None]));
        assert_eq!(c[0].average, vec![Some(-50.0)]);
    }

    #[test]
    fn float_noise_near_boundary() {
        // 3 * 0.1 is not exactly 0.3; it still lands in the first window.
        assert_eq!(window_index(3.0 * 0.1, 1.0), 1);
        assert_eq!(window_index(1.0, 1.0), 1);
        assert_eq!(window_index(1.0 + 1e-6, 1.0), 2);
    }

    fn line(n: usize) -> ZoneGraph {
        let defs: Vec<_> = (0..n).map(|i| ZoneDef { name: format!("z{i}"), floor: 0 }).collect();
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        ZoneGraph::build(&defs, &edges).unwrap()
    }

    fn recordings(tags: usize, zones: usize, len: usize) -> Vec<TagRecordings> {
        // x encodes (tag, zone, position) so provenance can be checked.
        (0..tags)
            .map(|t| {
                (0..zones)
                    .map(|z| {
                        (0..len)
                            .map(|i| AveragedStep {
                                timestamp: (i + 1) as f64,
                                x: vec![t as f64, z as f64, i as f64],
                                label: Some(ZoneId(z)),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn augmentation_slices_are_contiguous() {
        let g = line(4);
        let recs = recordings(2, 4, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = augment_cross_zone(&recs, &g, 10, 3, 1.0, &mut rng).unwrap();
        assert_eq!(out.len(), 2 * 3 * 3);
        for traj in &out {
            let s = traj.splice.unwrap();
            assert_eq!(traj.len(), 20);
            for (i, step) in traj.steps.iter().enumerate() {
                let (zone, start, off) = if i < 10 { (s.from, s.from_start, i) } else { (s.to, s.to_start, i - 10) };
                assert_eq!(step.x, vec![s.tag as f64, zone.0 as f64, (start + off) as f64]);
                assert_eq!(step.label, Some(zone));
                assert_eq!(step.timestamp, (i + 1) as f64);
            }
            assert!(g.is_adjacent(s.from, s.to));
            LabeledTrajectory::new(traj.steps.clone(), 1.0).unwrap();
        }
        // Repetitions alternate orientation.
        let first_pair: Vec<_> = out[..3].iter().map(|t| t.splice.unwrap().from.0).collect();
        assert_eq!(first_pair, vec![0, 1, 0]);
    }

    #[test]
    fn augmentation_rejects_short_recordings() {
        let g = line(3);
        let mut recs = recordings(1, 3, 30);
        recs[0][2].truncate(5);
        let err = augment_cross_zone(&recs, &g, 10, 1, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, DatasetError::ShortRecording { zone: ZoneId(2), len: 5, .. }));
    }

    #[test]
    fn tag_splits() {
        let s = split_tags(6, 1).unwrap();
        assert_eq!(s.train.len(), 5);
        assert!(!s.train.contains(&s.validation));
        assert_eq!(split_tags(6, 1).unwrap(), s);
        let s2 = split_tags(2, 3).unwrap();
        assert_eq!(s2.train.len(), 1);
        assert!(matches!(split_tags(1, 0), Err(DatasetError::TooFewTags(1))));
    }

    #[test]
    fn trajectory_validation() {
        let step = |t: f64| AveragedStep { timestamp: t, x: vec![0.0], label: Some(ZoneId(0)) };
        assert!(LabeledTrajectory::new(vec![], 1.0).is_err());
        assert!(LabeledTrajectory::new(vec![step(1.0), step(2.5)], 1.0).is_err());
        assert!(LabeledTrajectory::new(vec![step(1.0), step(2.0)], 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn average_is_permutation_invariant(
            vals in proptest::collection::vec(proptest::option::of(-110.0f64..-20.0), 1..30),
            seed in any::<u64>(),
        ) {
            let frames: Vec<_> = vals.iter().map(|&v| frame(0.5, vec![v])).collect();
            let mut shuffled = frames.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = temporal_average(&frames, 1)[0];
            let b = temporal_average(&shuffled, 1)[0];
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn normalization_is_monotone(a in proptest::option::of(-130.0f64..10.0), d in 0.0f64..50.0) {
            let lo = impute_and_normalize(&[a], -100.0, -30.0)[0];
            let hi = impute_and_normalize(&[Some(a.unwrap_or(-100.0) + d)], -100.0, -30.0)[0];
            prop_assert!(lo <= hi);
            prop_assert!((0.0..=1.0).contains(&lo));
        }

        #[test]
        fn augmentation_count_and_single_change(tags in 1usize..4, zones in 2usize..6, per_pair in 1usize..4, seed in any::<u64>()) {
            let g = line(zones);
            let recs = recordings(tags, zones, 12);
            let out = augment_cross_zone(&recs, &g, 5, per_pair, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(out.len(), tags * g.connected_pairs().len() * per_pair);
            for t in &out {
                let labels = t.labels();
                let changes: Vec<_> = labels.windows(2).filter(|w| w[0] != w[1]).collect();
                prop_assert_eq!(changes.len(), 1);
                prop_assert!(g.is_adjacent(changes[0][0], changes[0][1]));
            }
        }
    }
}
