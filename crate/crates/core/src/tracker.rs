//! Streaming per-tag inference.
//!
//! Frames are windowed every `dt` seconds of input time. Each closed window
//! is normalized and appended to a history of the last `lookback` inputs; the
//! network is replayed from zero state over that history, the classifier
//! output is re-weighted by the posterior constraint and the most probable
//! zone is emitted.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::dataset::{Normalization, Windower};
use crate::net::{classify, lstm_step, NetParams, RecurrentState};
use crate::posterior::{apply_constraint, ConstraintParams};
use crate::signal_sim::RssiFrame;
use crate::zone_graph::{ZoneGraph, ZoneId};

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("model predicts {model} zones, building has {building}")]
    ZoneMismatch { model: usize, building: usize },
    #[error("lookback must be at least 1")]
    Lookback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// `delta_t` doubles as the averaging window.
    pub constraint: ConstraintParams,
    pub lookback: usize,
    pub norm: Normalization,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig { constraint: ConstraintParams::default(), lookback: 10, norm: Normalization::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneDecision {
    /// End of the averaging window that produced this decision.
    pub timestamp: f64,
    pub zone: ZoneId,
    pub raw_probs: Vec<f64>,
    pub constrained_probs: Vec<f64>,
}

impl ZoneDecision {
    /// The `n` most probable zones after the constraint, best first.
    pub fn top(&self, n: usize) -> Vec<(ZoneId, f64)> {
        let mut idx: Vec<usize> = (0..self.constrained_probs.len()).collect();
        idx.sort_by(|&a, &b| self.constrained_probs[b].total_cmp(&self.constrained_probs[a]).then(a.cmp(&b)));
        idx.into_iter().take(n).map(|i| (ZoneId(i), self.constrained_probs[i])).collect()
    }
}

/// One tag's inference state. Parameters and graph are shared read-only.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: Arc<NetParams>,
    graph: Arc<ZoneGraph>,
    config: TrackerConfig,
    windower: Windower,
    history: VecDeque<Vec<f64>>,
    recurrent: RecurrentState,
    prev_zone: Option<ZoneId>,
    emitted: usize,
}

impl Tracker {
    pub fn new(params: Arc<NetParams>, graph: Arc<ZoneGraph>, config: TrackerConfig) -> Result<Self, TrackerError> {
        if params.class_dim() != graph.zone_count() {
            return Err(TrackerError::ZoneMismatch { model: params.class_dim(), building: graph.zone_count() });
        }
        if config.lookback == 0 {
            return Err(TrackerError::Lookback);
        }
        Ok(Tracker {
            windower: Windower::new(config.constraint.delta_t, params.input_dim()),
            recurrent: RecurrentState::zeros(&params),
            history: VecDeque::with_capacity(config.lookback),
            params,
            graph,
            config,
            prev_zone: None,
            emitted: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Zone of the last decision, if any.
    pub fn prev_zone(&self) -> Option<ZoneId> {
        self.prev_zone
    }

    /// Decisions emitted so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Frames rejected for arriving out of order.
    pub fn dropped(&self) -> usize {
        self.windower.dropped()
    }

    /// State after the most recent replay.
    pub fn recurrent(&self) -> &RecurrentState {
        &self.recurrent
    }

    /// Buffers `frame` and returns one decision per window it closes.
    ///
    /// Usually zero or one; a gap in the stream closes every skipped window
    /// as all-missing.
    pub fn ingest(&mut self, frame: RssiFrame) -> Vec<ZoneDecision> {
        self.windower
            .push(frame)
            .into_iter()
            .map(|w| {
                let x = self.config.norm.apply(&w.average);
                self.decide(w.end, x)
            })
            .collect()
    }

    fn decide(&mut self, timestamp: f64, x: Vec<f64>) -> ZoneDecision {
        if self.history.len() == self.config.lookback {
            self.history.pop_front();
        }
        self.history.push_back(x);
        let mut state = RecurrentState::zeros(&self.params);
        for x in &self.history {
            state = lstm_step(&self.params, x, &state);
        }
        let raw_probs = classify(&self.params, state.h());
        self.recurrent = state;

        let (constrained_probs, zone) = match self.prev_zone {
            None => {
                let zone = ZoneId(crate::net::argmax(&raw_probs));
                (raw_probs.clone(), zone)
            }
            Some(prev) => {
                let d = apply_constraint(&raw_probs, prev, &self.graph, &self.config.constraint);
                (d.constrained, d.chosen)
            }
        };
        self.prev_zone = Some(zone);
        self.emitted += 1;
        ZoneDecision { timestamp, zone, raw_probs, constrained_probs }
    }
}

/// Feeds a whole recording through a fresh tracker.
pub fn run_offline(
    params: Arc<NetParams>,
    graph: Arc<ZoneGraph>,
    config: TrackerConfig,
    frames: &[RssiFrame],
) -> Result<Vec<ZoneDecision>, TrackerError> {
    let mut t = Tracker::new(params, graph, config)?;
    Ok(frames.iter().flat_map(|f| t.ingest(f.clone())).collect())
}

/// Independent trackers keyed by tag id.
#[derive(Debug, Clone)]
pub struct TagTrackers {
    params: Arc<NetParams>,
    graph: Arc<ZoneGraph>,
    config: TrackerConfig,
    tags: BTreeMap<String, Tracker>,
}

impl TagTrackers {
    pub fn new(params: Arc<NetParams>, graph: Arc<ZoneGraph>, config: TrackerConfig) -> Result<Self, TrackerError> {
        // Validate once up front so per-tag creation cannot fail.
        Tracker::new(params.clone(), graph.clone(), config)?;
        Ok(TagTrackers { params, graph, config, tags: BTreeMap::new() })
    }

    pub fn ingest(&mut self, tag: &str, frame: RssiFrame) -> Vec<ZoneDecision> {
        let t = match self.tags.get_mut(tag) {
            Some(t) => t,
            None => {
                let t = Tracker::new(self.params.clone(), self.graph.clone(), self.config).expect("validated");
                self.tags.entry(tag.to_string()).or_insert(t)
            }
        };
        t.ingest(frame)
    }

    pub fn dropped(&self) -> usize {
        self.tags.values().map(Tracker::dropped).sum()
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.tags.keys().map(String::as_str)
    }
}
