//! Seeded generator for synthetic buildings and sensor layouts.
//!
//! Zones are laid out as cells of a grid on each floor. Candidate adjacencies
//! are orthogonal and diagonal grid neighbours plus two stairwell links
//! between consecutive floors. A random spanning tree over the candidates
//! keeps the building connected, then extra candidates are added until the
//! requested edge count is reached.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::rng::{self, Stream};
use crate::signal_sim::{Point, Sensor, SensorLayout};
use crate::zone_graph::{GraphError, ZoneDef, ZoneGraph, ZoneId};

/// Grid cell pitch, in meters.
pub const CELL_M: f64 = 6.0;
/// Half-width of the region a tag occupies inside a zone.
pub const ZONE_RADIUS_M: f64 = 2.5;

#[derive(Debug, Error)]
pub enum BuildingError {
    #[error("impossible building: {0}")]
    Impossible(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildingSpec {
    pub zones: usize,
    pub sensors: usize,
    pub floors: usize,
    /// Adjacent pairs to generate; `None` scales the 115-zone / 215-pair ratio.
    pub edges: Option<usize>,
}

impl BuildingSpec {
    /// 115 zones, 142 sensors, 3 floors, 215 connected pairs.
    pub fn paper() -> Self {
        BuildingSpec { zones: 115, sensors: 142, floors: 3, edges: Some(215) }
    }

    /// 20 zones, 25 sensors on one floor: the default benchmark.
    pub fn desk() -> Self {
        BuildingSpec { zones: 20, sensors: 25, floors: 1, edges: None }
    }

    fn target_edges(&self) -> usize {
        self.edges
            .unwrap_or_else(|| ((self.zones as f64) * 215.0 / 115.0).round() as usize)
    }
}

struct Cell {
    floor: usize,
    row: usize,
    col: usize,
}

fn floor_sizes(zones: usize, floors: usize) -> Vec<usize> {
    (0..floors).map(|f| zones / floors + usize::from(f < zones % floors)).collect()
}

fn grid_cols(n: usize) -> usize {
    (n as f64).sqrt().ceil().max(1.0) as usize
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let next = self.0[x];
            self.0[x] = r;
            x = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

/// Generates a connected building and its sensor layout from `seed`.
pub fn generate(spec: &BuildingSpec, seed: u64) -> Result<(ZoneGraph, SensorLayout), BuildingError> {
    let BuildingSpec { zones, sensors, floors, .. } = *spec;
    if zones == 0 || sensors == 0 || floors == 0 {
        return Err(BuildingError::Impossible("zones, sensors and floors must be at least 1".into()));
    }
    if floors > zones {
        return Err(BuildingError::Impossible(format!("{floors} floors for {zones} zones")));
    }
    let mut rng = rng::stream(seed, Stream::Building);

    let mut cells = Vec::with_capacity(zones);
    let mut first_of_floor = Vec::with_capacity(floors);
    for (floor, &n) in floor_sizes(zones, floors).iter().enumerate() {
        first_of_floor.push(cells.len());
        let cols = grid_cols(n);
        cells.extend((0..n).map(|i| Cell { floor, row: i / cols, col: i % cols }));
    }

    let mut candidates = Vec::new();
    for (floor, &n) in floor_sizes(zones, floors).iter().enumerate() {
        let base = first_of_floor[floor];
        let cols = grid_cols(n);
        let at = |r: usize, c: usize| (c < cols).then(|| r * cols + c).filter(|&i| i < n).map(|i| base + i);
        for i in 0..n {
            let (r, c) = (i / cols, i % cols);
            let mut push = |j: Option<usize>| {
                if let Some(j) = j {
                    candidates.push((base + i, j));
                }
            };
            push(at(r, c + 1));
            push(at(r + 1, c));
            push(at(r + 1, c + 1));
            if c > 0 {
                push(at(r + 1, c - 1));
            }
        }
        if floor + 1 < floors {
            let above = floor_sizes(zones, floors)[floor + 1];
            let shared = n.min(above);
            let stairs = [0, shared - 1];
            for (k, &s) in stairs.iter().enumerate() {
                if k == 0 || s != stairs[0] {
                    candidates.push((base + s, first_of_floor[floor + 1] + s));
                }
            }
        }
    }

    let target = match spec.edges {
        Some(e) => e,
        None => spec.target_edges().clamp(zones - 1, candidates.len()),
    };
    if target + 1 < zones || target > candidates.len() {
        return Err(BuildingError::Impossible(format!(
            "{target} adjacent pairs requested; need between {} and {}",
            zones - 1,
            candidates.len()
        )));
    }

    candidates.shuffle(&mut rng);
    let mut dsu = DisjointSet((0..zones).collect());
    let (mut tree, mut rest): (Vec<_>, Vec<_>) = (Vec::new(), Vec::new());
    for &(a, b) in &candidates {
        if dsu.union(a, b) {
            tree.push((a, b));
        } else {
            rest.push((a, b));
        }
    }
    let mut edges = tree;
    edges.extend(rest.into_iter().take(target - edges.len()));

    let defs: Vec<_> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| ZoneDef { name: format!("F{}-Z{:03}", c.floor + 1, i), floor: c.floor as u32 })
        .collect();
    let graph = ZoneGraph::build(&defs, &edges)?;

    let zone_anchor: Vec<Point> = cells
        .iter()
        .map(|c| Point { x: (c.col as f64 + 0.5) * CELL_M, y: (c.row as f64 + 0.5) * CELL_M, floor: c.floor as u32 })
        .collect();

    let mut homes: Vec<usize> = if sensors >= zones {
        let mut h: Vec<usize> = (0..zones).collect();
        h.extend((zones..sensors).map(|_| rng.random_range(0..zones)));
        h
    } else {
        let mut all: Vec<usize> = (0..zones).collect();
        all.shuffle(&mut rng);
        all.truncate(sensors);
        all.sort_unstable();
        all
    };
    homes.truncate(sensors);
    let sensors = homes
        .into_iter()
        .map(|z| {
            let a = zone_anchor[z];
            let position = Point {
                x: a.x + rng.random_range(-ZONE_RADIUS_M..=ZONE_RADIUS_M),
                y: a.y + rng.random_range(-ZONE_RADIUS_M..=ZONE_RADIUS_M),
                floor: a.floor,
            };
            Sensor { position, home_zone: ZoneId(z) }
        })
        .collect();

    let layout = SensorLayout { sensors, zone_anchor, zone_radius: ZONE_RADIUS_M };
    Ok((graph, layout))
}
