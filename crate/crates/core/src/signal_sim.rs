//! Synthetic RSSI measurements and ground-truth tag movement.
//!
//! Signal strength follows a log-distance path-loss model with per-wall and
//! per-floor attenuation, Gaussian fluctuation and distance-dependent
//! dropout. Walls crossed between a tag and a sensor are approximated by the
//! hop distance between the tag's zone and the sensor's home zone.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::zone_graph::{ZoneGraph, ZoneId};
use crate::BROADCAST_SECONDS;

/// Vertical spacing between floors, in meters.
pub const FLOOR_HEIGHT_M: f64 = 4.0;

/// Plausible RSSI band, in dBm. Simulated readings are clamped into it.
pub const RSSI_MIN_DBM: f64 = -120.0;
pub const RSSI_MAX_DBM: f64 = 0.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid propagation parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("duration must be positive, got {0}")]
    Duration(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub floor: u32,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        let dz = (self.floor as f64 - other.floor as f64) * FLOOR_HEIGHT_M;
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + dz * dz).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub position: Point,
    pub home_zone: ZoneId,
}

/// Sensor positions plus one anchor point per zone.
///
/// A simulated tag inside zone `z` stays within `zone_radius` meters of
/// `zone_anchor[z]` along each horizontal axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub sensors: Vec<Sensor>,
    pub zone_anchor: Vec<Point>,
    pub zone_radius: f64,
}

impl SensorLayout {
    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    /// Sensors per zone.
    pub fn density(&self) -> f64 {
        self.sensors.len() as f64 / self.zone_anchor.len() as f64
    }

    pub fn validate(&self, g: &ZoneGraph) -> Result<(), SimError> {
        if self.sensors.is_empty() {
            return Err(SimError::Layout("no sensors".into()));
        }
        if self.zone_anchor.len() != g.zone_count() {
            return Err(SimError::Layout(format!(
                "{} zone anchors for {} zones",
                self.zone_anchor.len(),
                g.zone_count()
            )));
        }
        if let Some(s) = self.sensors.iter().find(|s| !g.contains(s.home_zone)) {
            return Err(SimError::Layout(format!("sensor home zone {} out of range", s.home_zone)));
        }
        if !(self.zone_radius >= 0.0) {
            return Err(SimError::Layout(format!("zone radius {}", self.zone_radius)));
        }
        Ok(())
    }

    /// Keeps only the sensors at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> SensorLayout {
        SensorLayout {
            sensors: indices.iter().map(|&i| self.sensors[i].clone()).collect(),
            zone_anchor: self.zone_anchor.clone(),
            zone_radius: self.zone_radius,
        }
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| SimError::Layout(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| SimError::Layout(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Walls crossed from a tag in `zone` to each sensor, as zone-hop distance.
    /// Disconnected pairs count as `zone_count` walls.
    pub fn walls_from(&self, g: &ZoneGraph, zone: ZoneId) -> Vec<u32> {
        let far = g.zone_count() as u32;
        self.sensors
            .iter()
            .map(|s| g.distance(zone, s.home_zone).unwrap_or(far))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// RSSI at 1 m, dBm.
    pub p0: f64,
    pub path_loss_exponent: f64,
    /// dB lost per zone boundary.
    pub wall_attenuation: f64,
    /// dB lost per floor of separation.
    pub floor_attenuation: f64,
    pub noise_sigma: f64,
    pub missing_prob_base: f64,
    pub missing_prob_per_meter: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            p0: -45.0,
            path_loss_exponent: 2.5,
            wall_attenuation: 4.0,
            floor_attenuation: 15.0,
            noise_sigma: 6.0,
            missing_prob_base: 0.1,
            missing_prob_per_meter: 0.02,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let finite = [
            ("p0", self.p0),
            ("path_loss_exponent", self.path_loss_exponent),
            ("wall_attenuation", self.wall_attenuation),
            ("floor_attenuation", self.floor_attenuation),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(SimError::InvalidParam { name, value });
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SimError::InvalidParam { name: "noise_sigma", value: self.noise_sigma });
        }
        for (name, value) in [
            ("missing_prob_base", self.missing_prob_base),
            ("missing_prob_per_meter", self.missing_prob_per_meter),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::InvalidParam { name, value });
            }
        }
        Ok(())
    }

    /// Noise-free received strength at `dist` meters through `walls` walls and `floors` floors.
    pub fn mean_rssi(&self, dist: f64, walls: u32, floors: u32) -> f64 {
        self.p0
            - 10.0 * self.path_loss_exponent * dist.max(1.0).log10()
            - self.wall_attenuation * walls as f64
            - self.floor_attenuation * floors as f64
    }

    pub fn missing_prob(&self, dist: f64) -> f64 {
        (self.missing_prob_base + self.missing_prob_per_meter * dist).min(1.0)
    }
}

/// One broadcast as heard by every sensor. `None` marks a sensor that heard nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct RssiFrame {
    pub timestamp: f64,
    pub values: Vec<Option<f64>>,
}

impl RssiFrame {
    pub fn missing(timestamp: f64, sensors: usize) -> Self {
        RssiFrame { timestamp, values: vec![None; sensors] }
    }

    /// Projects the frame onto a subset of sensors.
    pub fn select(&self, indices: &[usize]) -> RssiFrame {
        RssiFrame { timestamp: self.timestamp, values: indices.iter().map(|&i| self.values[i]).collect() }
    }
}

/// Samples one frame for a tag at `tag_point`. `walls[i]` is the wall count to sensor `i`.
///
/// Parameters are assumed validated.
pub fn emit_frame<R: Rng + ?Sized>(
    layout: &SensorLayout,
    params: &PropagationParams,
    tag_point: &Point,
    walls: &[u32],
    timestamp: f64,
    rng: &mut R,
) -> RssiFrame {
    debug_assert_eq!(walls.len(), layout.sensors.len());
    let noise = (params.noise_sigma > 0.0).then(|| Normal::new(0.0, params.noise_sigma).unwrap());
    let values = layout
        .sensors
        .iter()
        .zip(walls)
        .map(|(s, &w)| {
            let dist = tag_point.distance(&s.position);
            let p_missing = params.missing_prob(dist);
            if p_missing >= 1.0 || (p_missing > 0.0 && rng.random::<f64>() < p_missing) {
                return None;
            }
            let floors = tag_point.floor.abs_diff(s.position.floor);
            let mut v = params.mean_rssi(dist, w, floors);
            if let Some(n) = &noise {
                v += n.sample(rng);
            }
            Some(v.clamp(RSSI_MIN_DBM, RSSI_MAX_DBM))
        })
        .collect();
    RssiFrame { timestamp, values }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkSample {
    pub timestamp: f64,
    pub zone: ZoneId,
    pub point: Point,
}

/// Ground-truth trajectory sampled every broadcast interval.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthWalk {
    pub samples: Vec<WalkSample>,
}

impl GroundTruthWalk {
    /// Number of zone changes along the walk.
    pub fn crossings(&self) -> usize {
        self.samples.windows(2).filter(|w| w[0].zone != w[1].zone).count()
    }

    /// Zone at the sample whose timestamp is closest to `t`.
    pub fn zone_at(&self, t: f64) -> Option<ZoneId> {
        let idx = self.samples.partition_point(|s| s.timestamp < t);
        let candidates = [idx.checked_sub(1), Some(idx)];
        candidates
            .into_iter()
            .flatten()
            .filter_map(|i| self.samples.get(i))
            .min_by(|a, b| (a.timestamp - t).abs().total_cmp(&(b.timestamp - t).abs()))
            .map(|s| s.zone)
    }
}

fn sample_count(duration: f64) -> usize {
    (duration / BROADCAST_SECONDS).round() as usize
}

fn broadcast_time(start: f64, i: usize) -> f64 {
    start + (i + 1) as f64 / 10.0
}

/// Bounded random motion of a tag inside one zone.
struct Jitter {
    offset: (f64, f64),
    radius: f64,
}

impl Jitter {
    const STEP_SIGMA_M: f64 = 0.4;

    fn enter<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Self {
        let mut uniform = || if radius > 0.0 { rng.random_range(-radius..=radius) } else { 0.0 };
        let offset = (uniform(), uniform());
        Jitter { offset, radius }
    }

    fn step<R: Rng + ?Sized>(&mut self, anchor: &Point, rng: &mut R) -> Point {
        if self.radius > 0.0 {
            let n = Normal::new(0.0, Self::STEP_SIGMA_M).unwrap();
            self.offset.0 = reflect(self.offset.0 + n.sample(rng), self.radius);
            self.offset.1 = reflect(self.offset.1 + n.sample(rng), self.radius);
        }
        Point { x: anchor.x + self.offset.0, y: anchor.y + self.offset.1, floor: anchor.floor }
    }
}

fn reflect(v: f64, r: f64) -> f64 {
    let mut v = v;
    // A single Gaussian step rarely exceeds the box; loop covers the rest.
    while v.abs() > r {
        v = if v > r { 2.0 * r - v } else { -2.0 * r - v };
    }
    v
}

/// Random walk starting in `start`: exponential dwell per zone (mean
/// `dwell_mean` seconds), then a move to a uniformly chosen neighbor.
pub fn random_walk<R: Rng + ?Sized>(
    g: &ZoneGraph,
    layout: &SensorLayout,
    start: ZoneId,
    duration: f64,
    dwell_mean: f64,
    rng: &mut R,
) -> Result<GroundTruthWalk, SimError> {
    if !(duration > 0.0) {
        return Err(SimError::Duration(duration));
    }
    if !(dwell_mean > 0.0) {
        return Err(SimError::Duration(dwell_mean));
    }
    let dwell = Exp::new(1.0 / dwell_mean).map_err(|_| SimError::Duration(dwell_mean))?;
    let n = sample_count(duration);
    let mut zone = start;
    let mut jitter = Jitter::enter(layout.zone_radius, rng);
    let mut remaining = dwell.sample(rng);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        if remaining <= 0.0 {
            let nbrs = g.neighbors(zone);
            if !nbrs.is_empty() {
                zone = nbrs[rng.random_range(0..nbrs.len())];
                jitter = Jitter::enter(layout.zone_radius, rng);
            }
            remaining = dwell.sample(rng);
        }
        let point = jitter.step(&layout.zone_anchor[zone.0], rng);
        samples.push(WalkSample { timestamp: broadcast_time(0.0, i), zone, point });
        remaining -= BROADCAST_SECONDS;
    }
    Ok(GroundTruthWalk { samples })
}

/// Frames heard along a walk.
pub fn walk_frames<R: Rng + ?Sized>(
    g: &ZoneGraph,
    layout: &SensorLayout,
    params: &PropagationParams,
    walk: &GroundTruthWalk,
    rng: &mut R,
) -> Vec<RssiFrame> {
    let mut walls_cache: Vec<Option<Vec<u32>>> = vec![None; g.zone_count()];
    walk.samples
        .iter()
        .map(|s| {
            let walls = walls_cache[s.zone.0].get_or_insert_with(|| layout.walls_from(g, s.zone));
            emit_frame(layout, params, &s.point, walls, s.timestamp, rng)
        })
        .collect()
}

/// A stationary recording of one tag inside one zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSession {
    pub zone: ZoneId,
    pub frames: Vec<RssiFrame>,
}

/// Records `duration` seconds of a tag moving within `zone`, with frames
/// timestamped from `start_time` onward at the broadcast interval.
pub fn record_zone_session<R: Rng + ?Sized>(
    g: &ZoneGraph,
    layout: &SensorLayout,
    params: &PropagationParams,
    zone: ZoneId,
    duration: f64,
    start_time: f64,
    rng: &mut R,
) -> Result<ZoneSession, SimError> {
    if !(duration > 0.0) {
        return Err(SimError::Duration(duration));
    }
    let walls = layout.walls_from(g, zone);
    let anchor = layout.zone_anchor[zone.0];
    let mut jitter = Jitter::enter(layout.zone_radius, rng);
    let frames = (0..sample_count(duration))
        .map(|i| {
            let p = jitter.step(&anchor, rng);
            emit_frame(layout, params, &p, &walls, broadcast_time(start_time, i), rng)
        })
        .collect();
    Ok(ZoneSession { zone, frames })
}
