//! On-disk layout of a run's artifacts.
//!
//! ```text
//! building.json, layout.json
//! <data>/data.json            manifest
//! <data>/train/tag{t}.csv     labeled frames, one session per zone
//! <data>/test/tag.csv         held-out tag, same layout
//! <data>/walks/walk{w}.csv    labeled frames of one walk
//! <data>/stream.csv           all walks as one multi-tag stream
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use zonetrack::records::{self, Recording};
use zonetrack::signal_sim::ZoneSession;
use zonetrack::{PropagationParams, SensorLayout, ZoneGraph};

/// Seed and argument digest stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    /// SHA-256 of the run's arguments, hex.
    pub config: String,
}

impl Provenance {
    pub fn new(seed: u64, args: &impl Serialize) -> Self {
        let json = serde_json::to_vec(args).expect("arguments serialize");
        Provenance { seed, config: hex::encode(Sha256::digest(&json)) }
    }

    pub fn digest_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        hex::decode_to_slice(&self.config, &mut out).expect("hex digest");
        out
    }

    pub fn meta(&self) -> Vec<(&'static str, String)> {
        vec![("seed", self.seed.to_string()), ("config", self.config.clone())]
    }

    pub fn comment_lines(&self) -> String {
        self.meta().into_iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

/// Writes `value` as pretty JSON with an added `provenance` member.
pub fn write_json(path: &Path, value: &impl Serialize, prov: &Provenance) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("provenance".into(), serde_json::to_value(prov)?);
    }
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_building(building: &Path, layout: &Path) -> Result<(ZoneGraph, SensorLayout)> {
    let g = ZoneGraph::load(building).with_context(|| format!("loading building {}", building.display()))?;
    let l = SensorLayout::load(layout).with_context(|| format!("loading layout {}", layout.display()))?;
    l.validate(&g).with_context(|| format!("layout {} does not fit building", layout.display()))?;
    Ok((g, l))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tags: usize,
    pub walks: usize,
    pub session_seconds: f64,
    pub walk_seconds: f64,
    pub dwell: f64,
    pub sensors: usize,
    pub zones: usize,
    pub propagation: PropagationParams,
}

pub struct DataDir(pub PathBuf);

impl DataDir {
    pub fn manifest_path(&self) -> PathBuf {
        self.0.join("data.json")
    }

    pub fn train_tag(&self, t: usize) -> PathBuf {
        self.0.join("train").join(format!("tag{t}.csv"))
    }

    pub fn test_tag(&self) -> PathBuf {
        self.0.join("test").join("tag.csv")
    }

    pub fn walk(&self, w: usize) -> PathBuf {
        self.0.join("walks").join(format!("walk{w}.csv"))
    }

    pub fn stream(&self) -> PathBuf {
        self.0.join("stream.csv")
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let path = self.manifest_path();
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Checks the data was generated for a building with this shape.
    pub fn manifest_for(&self, g: &ZoneGraph, layout: &SensorLayout) -> Result<Manifest> {
        let m = self.manifest()?;
        if m.zones != g.zone_count() || m.sensors != layout.sensor_count() {
            bail!(
                "data in {} has {} zones and {} sensors, building has {} zones and {} sensors",
                self.0.display(),
                m.zones,
                m.sensors,
                g.zone_count(),
                layout.sensor_count()
            );
        }
        Ok(m)
    }
}

pub fn write_recording(path: &Path, prov: &Provenance, rec: &Recording) -> Result<()> {
    let mut w = create(path)?;
    records::write_labeled(&mut w, &prov.meta(), rec).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    records::read_labeled(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// One session per zone, indexed by zone.
pub fn read_sessions(path: &Path, g: &ZoneGraph, sensors: usize) -> Result<Vec<ZoneSession>> {
    let rec = read_recording(path)?;
    if let Some(f) = rec.frames.iter().find(|f| f.values.len() != sensors) {
        bail!("{}: frame at {} has {} readings, expected {sensors}", path.display(), f.timestamp, f.values.len());
    }
    let mut slots: Vec<Option<ZoneSession>> = vec![None; g.zone_count()];
    for s in rec.sessions() {
        let z = s.zone;
        match slots.get_mut(z.0) {
            None => bail!("{}: zone {z} is not in the building", path.display()),
            Some(Some(_)) => bail!("{}: zone {z} recorded in more than one run", path.display()),
            Some(slot) => *slot = Some(s),
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(z, s)| s.with_context(|| format!("{}: no frames for zone {z}", path.display())))
        .collect()
}
