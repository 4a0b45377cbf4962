//! Zone-level indoor tracking from Bluetooth Low Energy signal strength.
//!
//! The building is a graph of zones. Fixed sensors report the RSSI of tag
//! broadcasts; a peephole LSTM followed by a dense classifier maps a short
//! history of time-averaged RSSI vectors to zone probabilities, and a
//! posterior constraint re-weights those probabilities by the hop distance
//! from the previously decided zone.
//!
//! Modules, bottom-up:
//!
//! * [`zone_graph`]: zones, adjacency and all-pairs hop distance.
//! * [`signal_sim`]: synthetic RSSI frames, zone sessions and random walks.
//! * [`building`]: seeded building and sensor-layout generator.
//! * [`dataset`]: temporal averaging, normalization, cross-zone augmentation.
//! * [`net`]: the network, BPTT, SGD training, model files.
//! * [`posterior`]: the hop-distance constraint on classifier output.
//! * [`tracker`]: streaming per-tag inference.
//! * [`eval`]: latency-tolerant accuracy, incorrect zone changes, sweeps.
//! * [`records`]: CSV frame files.
//! * [`benchmark`]: the seeded synthetic benchmark used by sweeps and tests.

pub mod benchmark;
pub mod building;
pub mod dataset;
pub mod eval;
pub mod net;
pub mod posterior;
pub mod records;
pub mod rng;
pub mod signal_sim;
pub mod tracker;
pub mod zone_graph;

pub use dataset::{AveragedStep, DatasetSplit, LabeledTrajectory};

pub use eval::{MetricReport, SweepResult};

pub use net::{NetConfig, NetParams, RecurrentState, TrainReport};

pub use posterior::{ConstraintParams, PosteriorDecision};

pub use records::Recording;

pub use signal_sim::{PropagationParams, RssiFrame, SensorLayout};

pub use tracker::{Tracker, TrackerConfig, ZoneDecision};

pub use zone_graph::{ZoneGraph, ZoneId};

/// Interval between two consecutive averaged steps, in seconds.
pub const STEP_SECONDS: f64 = 1.0;

/// Tag broadcast interval, in seconds.
pub const BROADCAST_SECONDS: f64 = 0.1;
