//! The seeded synthetic benchmark: a building, per-tag single-zone
//! recordings for training, a held-out tag for per-zone testing, and long
//! random walks for tracking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::building::{self, BuildingError, BuildingSpec};
use crate::dataset::{self, DatasetError, DatasetSplit, LabeledTrajectory, Normalization, TagRecordings, TagSplit};
use crate::net::{self, NetConfig, NetError, TrainReport};
use crate::records::Recording;
use crate::rng::{self, Stream};
use crate::signal_sim::{self, GroundTruthWalk, PropagationParams, RssiFrame, SensorLayout, SimError, ZoneSession};
use crate::zone_graph::{ZoneGraph, ZoneId};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Building(#[from] BuildingError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// How much data to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    /// Tags recorded for training and validation.
    pub tags: usize,
    /// Length of each single-zone recording, seconds.
    pub session_seconds: f64,
    pub walks: usize,
    pub walk_seconds: f64,
    /// Mean time spent in a zone during a walk, seconds.
    pub dwell_mean: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec { tags: 6, session_seconds: 120.0, walks: 5, walk_seconds: 1200.0, dwell_mean: 75.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub truth: GroundTruthWalk,
    pub frames: Vec<RssiFrame>,
}

impl Walk {
    /// Frames labeled with the zone the tag was in when each was sent.
    pub fn recording(&self) -> Recording {
        Recording { frames: self.frames.clone(), zones: self.truth.samples.iter().map(|s| s.zone).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub seed: u64,
    pub graph: ZoneGraph,
    pub layout: SensorLayout,
    pub propagation: PropagationParams,
    /// `sessions[tag][zone]`.
    pub sessions: Vec<Vec<ZoneSession>>,
    /// One recording per zone from a tag never used in training.
    pub test_sessions: Vec<ZoneSession>,
    pub walks: Vec<Walk>,
}

/// One session per zone, back to back in time.
fn record_tag(
    g: &ZoneGraph,
    layout: &SensorLayout,
    propagation: &PropagationParams,
    seconds: f64,
    rng: &mut rng::Rng,
) -> Result<Vec<ZoneSession>, SimError> {
    g.zones()
        .map(|z| signal_sim::record_zone_session(g, layout, propagation, z, seconds, z.0 as f64 * seconds, rng))
        .collect()
}

impl Benchmark {
    /// Generates a building from `building` and simulates `data` on it.
    pub fn generate(building: &BuildingSpec, data: &DataSpec, seed: u64) -> Result<Self, BenchmarkError> {
        let (graph, layout) = building::generate(building, seed)?;
        Self::simulate(graph, layout, PropagationParams::default(), data, seed)
    }

    /// The desk preset with default data volumes.
    pub fn desk(seed: u64) -> Result<Self, BenchmarkError> {
        Self::generate(&BuildingSpec::desk(), &DataSpec::default(), seed)
    }

    /// Simulates `data` on an existing building.
    ///
    /// Tag `t` draws from data sub-stream `t`; the test tag is sub-stream
    /// `data.tags`. Walk `w` draws from walk sub-stream `w`.
    pub fn simulate(
        graph: ZoneGraph,
        layout: SensorLayout,
        propagation: PropagationParams,
        data: &DataSpec,
        seed: u64,
    ) -> Result<Self, BenchmarkError> {
        layout.validate(&graph)?;
        propagation.validate()?;
        let mut sessions = Vec::with_capacity(data.tags);
        for tag in 0..data.tags {
            let mut rng = rng::substream(seed, Stream::Data, tag as u64);
            sessions.push(record_tag(&graph, &layout, &propagation, data.session_seconds, &mut rng)?);
        }
        let mut rng = rng::substream(seed, Stream::Data, data.tags as u64);
        let test_sessions = record_tag(&graph, &layout, &propagation, data.session_seconds, &mut rng)?;

        let mut walks = Vec::with_capacity(data.walks);
        for w in 0..data.walks {
            let mut rng = rng::substream(seed, Stream::Walk, w as u64);
            let start = ZoneId(rand::Rng::random_range(&mut rng, 0..graph.zone_count()));
            let truth = signal_sim::random_walk(&graph, &layout, start, data.walk_seconds, data.dwell_mean, &mut rng)?;
            let frames = signal_sim::walk_frames(&graph, &layout, &propagation, &truth, &mut rng);
            walks.push(Walk { truth, frames });
        }
        Ok(Benchmark { seed, graph, layout, propagation, sessions, test_sessions, walks })
    }

    pub fn sensor_count(&self) -> usize {
        self.layout.sensor_count()
    }

    /// Averaged training recordings restricted to `sensors`, per tag and zone.
    pub fn recordings(&self, sensors: &[usize], recipe: &Recipe) -> Vec<TagRecordings> {
        self.sessions.iter().map(|tag| averaged(tag, sensors, recipe)).collect()
    }

    /// Held-out per-zone test trajectories restricted to `sensors`.
    pub fn test_set(&self, sensors: &[usize], recipe: &Recipe) -> Result<Vec<LabeledTrajectory>, DatasetError> {
        averaged(&self.test_sessions, sensors, recipe)
            .into_iter()
            .map(|steps| LabeledTrajectory::new(steps, recipe.dt))
            .collect()
    }

    /// Tag split, augmented training/validation data and the per-zone test set.
    pub fn dataset(&self, sensors: &[usize], recipe: &Recipe) -> Result<(TagSplit, DatasetSplit), DatasetError> {
        let recordings = self.recordings(sensors, recipe);
        let mut augment = rng::stream(self.seed, Stream::Augment);
        let (tags, mut split) =
            dataset::split(&recordings, &self.graph, recipe.half_len, recipe.per_pair, recipe.dt, self.seed, &mut augment)?;
        split.test = self.test_set(sensors, recipe)?;
        Ok((tags, split))
    }

    /// Trains on `sensors` with `recipe`, sizing the network to the data.
    pub fn train(&self, sensors: &[usize], recipe: &Recipe) -> Result<TrainedModel, BenchmarkError> {
        self.train_with(sensors, recipe, |_| {})
    }

    pub fn train_with(
        &self,
        sensors: &[usize],
        recipe: &Recipe,
        on_epoch: impl FnMut(&net::EpochStats),
    ) -> Result<TrainedModel, BenchmarkError> {
        let (tags, split) = self.dataset(sensors, recipe)?;
        let config = NetConfig { input_dim: sensors.len(), class_dim: self.graph.zone_count(), ..recipe.net.clone() };
        let report = net::train_with(&config, &split, on_epoch)?;
        Ok(TrainedModel { config, tags, sensors: sensors.to_vec(), report, test: split.test })
    }

    /// Indices of every sensor, in layout order.
    pub fn all_sensors(&self) -> Vec<usize> {
        (0..self.sensor_count()).collect()
    }
}

fn averaged(sessions: &[ZoneSession], sensors: &[usize], recipe: &Recipe) -> Vec<Vec<dataset::AveragedStep>> {
    sessions
        .iter()
        .map(|s| {
            let frames: Vec<_> = s.frames.iter().map(|f| f.select(sensors)).collect();
            dataset::steps_from_frames(&frames, sensors.len(), recipe.dt, &recipe.norm, Some(s.zone))
        })
        .collect()
}

/// Everything needed to turn recordings into a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    /// `input_dim` and `class_dim` are overwritten from the data.
    pub net: NetConfig,
    /// Steps taken from each zone of a spliced trajectory.
    pub half_len: usize,
    /// Spliced trajectories per tag and adjacent pair.
    pub per_pair: usize,
    pub norm: Normalization,
    pub dt: f64,
}

impl Recipe {
    /// Sized for the desk preset: trains in well under a minute.
    pub fn desk(seed: u64) -> Self {
        Recipe {
            net: NetConfig {
                input_dim: 0,
                hidden_dim: 32,
                class_dim: 0,
                dense_dim: 32,
                layers: 1,
                lookback: 10,
                dropout_rate: 0.2,
                learning_rate: 0.05,
                epochs: 40,
                seed,
            },
            half_len: 25,
            per_pair: 3,
            norm: Normalization::default(),
            dt: crate::STEP_SECONDS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: NetConfig,
    pub tags: TagSplit,
    pub sensors: Vec<usize>,
    pub report: TrainReport,
    pub test: Vec<LabeledTrajectory>,
}

impl TrainedModel {
    pub fn params(&self) -> &net::NetParams {
        &self.report.selected_params
    }
}
