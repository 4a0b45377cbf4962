//! Building model: zones, their adjacency and the hop distance between them.
//!
//! The hop distance between two zones is the minimum number of zone
//! boundaries crossed walking from one to the other. It is computed once, by
//! breadth-first search from every zone, when the graph is built.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense zone index in `[0, zone_count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(pub usize);

impl ZoneId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for ZoneId {
    fn from(v: usize) -> Self {
        ZoneId(v)
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("zone id {id} out of range (zone count {count})")]
    OutOfRange { id: usize, count: usize },
    #[error("duplicate zone name {0:?}")]
    DuplicateName(String),
    #[error("zone {0} is adjacent to itself")]
    SelfAdjacency(usize),
    #[error("building has no zones")]
    Empty,
    #[error("building config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One entry of the `zones` list in a building file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneDef {
    pub name: String,
    pub floor: u32,
}

/// On-disk building description: `{"zones": [{name, floor}], "adjacency": [[i, j], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingConfig {
    pub zones: Vec<ZoneDef>,
    pub adjacency: Vec<[usize; 2]>,
}

impl BuildingConfig {
    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| GraphError::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| GraphError::Config(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Zones with adjacency and the precomputed all-pairs hop distance.
///
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneGraph {
    names: Vec<String>,
    floors: Vec<u32>,
    /// Unordered pairs stored as `(low, high)`, sorted lexicographically.
    pairs: Vec<(ZoneId, ZoneId)>,
    neighbors: Vec<Vec<ZoneId>>,
    /// Row-major `Z x Z`; `UNREACHABLE` marks disconnected pairs.
    distance: Vec<u32>,
}

const UNREACHABLE: u32 = u32::MAX;

impl ZoneGraph {
    pub fn build(zones: &[ZoneDef], adjacency: &[(usize, usize)]) -> Result<Self, GraphError> {
        let count = zones.len();
        if count == 0 {
            return Err(GraphError::Empty);
        }
        let mut seen = HashSet::with_capacity(count);
        for z in zones {
            if !seen.insert(z.name.as_str()) {
                return Err(GraphError::DuplicateName(z.name.clone()));
            }
        }

        let mut pairs = BTreeSet::new();
        for &(a, b) in adjacency {
            for id in [a, b] {
                if id >= count {
                    return Err(GraphError::OutOfRange { id, count });
                }
            }
            if a == b {
                return Err(GraphError::SelfAdjacency(a));
            }
            pairs.insert((a.min(b), a.max(b)));
        }

        let mut neighbors = vec![Vec::new(); count];
        for &(a, b) in &pairs {
            neighbors[a].push(ZoneId(b));
            neighbors[b].push(ZoneId(a));
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }

        let mut distance = vec![UNREACHABLE; count * count];
        let mut queue = VecDeque::with_capacity(count);
        for src in 0..count {
            let row = &mut distance[src * count..(src + 1) * count];
            row[src] = 0;
            queue.clear();
            queue.push_back(src);
            while let Some(u) = queue.pop_front() {
                let du = row[u];
                for &ZoneId(v) in &neighbors[u] {
                    if row[v] == UNREACHABLE {
                        row[v] = du + 1;
                        queue.push_back(v);
                    }
                }
            }
        }

        Ok(ZoneGraph {
            names: zones.iter().map(|z| z.name.clone()).collect(),
            floors: zones.iter().map(|z| z.floor).collect(),
            pairs: pairs.into_iter().map(|(a, b)| (ZoneId(a), ZoneId(b))).collect(),
            neighbors,
            distance,
        })
    }

    pub fn from_config(cfg: &BuildingConfig) -> Result<Self, GraphError> {
        let adjacency: Vec<_> = cfg.adjacency.iter().map(|p| (p[0], p[1])).collect();
        Self::build(&cfg.zones, &adjacency)
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        Self::from_config(&BuildingConfig::load(path)?)
    }

    pub fn to_config(&self) -> BuildingConfig {
        BuildingConfig {
            zones: self
                .names
                .iter()
                .zip(&self.floors)
                .map(|(name, &floor)| ZoneDef { name: name.clone(), floor })
                .collect(),
            adjacency: self.pairs.iter().map(|&(a, b)| [a.0, b.0]).collect(),
        }
    }

    pub fn zone_count(&self) -> usize {
        self.names.len()
    }

    pub fn zones(&self) -> impl Iterator<Item = ZoneId> {
        (0..self.zone_count()).map(ZoneId)
    }

    pub fn name(&self, z: ZoneId) -> &str {
        &self.names[z.0]
    }

    pub fn floor(&self, z: ZoneId) -> u32 {
        self.floors[z.0]
    }

    pub fn neighbors(&self, z: ZoneId) -> &[ZoneId] {
        &self.neighbors[z.0]
    }

    pub fn contains(&self, z: ZoneId) -> bool {
        z.0 < self.zone_count()
    }

    pub fn check(&self, z: ZoneId) -> Result<ZoneId, GraphError> {
        if self.contains(z) {
            Ok(z)
        } else {
            Err(GraphError::OutOfRange { id: z.0, count: self.zone_count() })
        }
    }

    /// Hop distance between `m` and `n`; `None` when no path connects them.
    ///
    /// Panics if either id is out of range.
    pub fn distance(&self, m: ZoneId, n: ZoneId) -> Option<u32> {
        let z = self.zone_count();
        assert!(m.0 < z && n.0 < z, "zone id out of range");
        match self.distance[m.0 * z + n.0] {
            UNREACHABLE => None,
            d => Some(d),
        }
    }

    /// Checked variant of [`ZoneGraph::distance`].
    pub fn zone_distance(&self, m: ZoneId, n: ZoneId) -> Result<Option<u32>, GraphError> {
        self.check(m)?;
        self.check(n)?;
        Ok(self.distance(m, n))
    }

    pub fn is_adjacent(&self, m: ZoneId, n: ZoneId) -> bool {
        self.neighbors[m.0].binary_search(&n).is_ok()
    }

    /// Adjacent pairs as `(low, high)`, lexicographically ordered.
    pub fn connected_pairs(&self) -> &[(ZoneId, ZoneId)] {
        &self.pairs
    }

    pub fn is_connected(&self) -> bool {
        let z = self.zone_count();
        self.distance[..z].iter().all(|&d| d != UNREACHABLE)
    }
}
