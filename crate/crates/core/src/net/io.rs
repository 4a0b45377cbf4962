//! Binary model files.
//!
//! Layout, little-endian throughout:
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `ZTRKNET\0` |
//! | 4     | format version (`1`) |
//! | 4 x 5 | input dim S, hidden dim H, classes Z, dense dim D, LSTM layers |
//! | 8     | run seed |
//! | 32    | config digest (opaque to this crate) |
//! | 8 x n | parameters as `f64`, blocks in [`NetParams::blocks`] order |
//!
//! The payload length must match the header exactly.

use std::path::Path;

use super::params::{NetParams, Shape};
use super::NetError;

pub const MAGIC: &[u8; 8] = b"ZTRKNET\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 * 5 + 8 + 32;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub params: NetParams,
    pub seed: u64,
    pub digest: [u8; 32],
}

impl ModelFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = self.params.shape();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in [s.input_dim, s.hidden_dim, s.class_dim, s.dense_dim, s.layers] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.digest);
        for (_, block) in self.params.blocks() {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        let corrupt = |m: &str| NetError::Corrupt(m.to_string());
        if bytes.len() < HEADER_LEN {
            return Err(corrupt("truncated header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(NetError::Corrupt(format!("unsupported version {version}")));
        }
        let dims: Vec<usize> = (0..5).map(|k| u32_at(12 + 4 * k) as usize).collect();
        if dims.iter().any(|&d| d == 0) {
            return Err(corrupt("zero dimension in header"));
        }
        let shape = Shape { input_dim: dims[0], hidden_dim: dims[1], class_dim: dims[2], dense_dim: dims[3], layers: dims[4] };
        let seed = u64::from_le_bytes(bytes[32..40].try_into().unwrap());
        let digest: [u8; 32] = bytes[40..72].try_into().unwrap();

        let mut params = NetParams::zeros(shape);
        let expected = HEADER_LEN + 8 * params.len();
        if bytes.len() != expected {
            return Err(NetError::Corrupt(format!("payload is {} bytes, header implies {expected}", bytes.len())));
        }
        let mut values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for block in params.blocks_mut() {
            for v in block.iter_mut() {
                *v = values.next().unwrap();
            }
        }
        Ok(ModelFile { params, seed, digest })
    }
}

pub fn save_params(model: &ModelFile, path: &Path) -> Result<(), NetError> {
    std::fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<ModelFile, NetError> {
    ModelFile::from_bytes(&std::fs::read(path)?)
}

/// Loads a model and checks it fits `sensors` inputs and `zones` outputs.
pub fn load_params_for(path: &Path, sensors: usize, zones: usize) -> Result<ModelFile, NetError> {
    let m = load_params(path)?;
    let s = m.params.shape();
    if s.input_dim != sensors || s.class_dim != zones {
        return Err(NetError::Shape(format!(
            "model expects {} sensors and {} zones, building has {sensors} sensors and {zones} zones",
            s.input_dim, s.class_dim
        )));
    }
    Ok(m)
}
