//! Velocity model files: a binary parameter file plus a JSON sidecar.
//!
//! Binary layout (little-endian): magic `MXVF`, format version (u32),
//! mapping dimension L (u32), frequency scale (f64), layer count n (u32),
//! n layer widths (u32), domain dims (3 × u32), the L×4 frequency matrix
//! row-major (f32), then every layer's weights and biases (f32).

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{ReadBytesExt, WriteBytesExt, LE};
use mixaug_core::inr::{
    FourierEncoding, Mlp, RegistrationConfig, TrainingReport, VelocityFieldModel,
};
use mixaug_core::volume::GridSpec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MXVF";
pub const MODEL_VERSION: u32 = 1;

/// Provenance stored next to a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub version: u32,
    pub grid: GridSpec,
    pub config: RegistrationConfig,
    pub source: Option<String>,
    pub target: Option<String>,
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub reverted: Option<bool>,
}

impl ModelMetadata {
    pub fn new(
        grid: GridSpec,
        config: RegistrationConfig,
        report: Option<&TrainingReport>,
    ) -> Self {
        Self {
            version: MODEL_VERSION,
            grid,
            config,
            source: None,
            target: None,
            initial_loss: report.map(|r| r.initial_loss),
            final_loss: report.map(|r| r.final_loss),
            reverted: report.map(|r| r.reverted),
        }
    }
}

/// `model.mxvf` -> `model.mxvf.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_model(model: &VelocityFieldModel) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    let enc = model.encoding();
    let sizes = model.mlp().sizes();
    // Writes into a Vec cannot fail.
    b.write_u32::<LE>(MODEL_VERSION).unwrap();
    b.write_u32::<LE>(enc.mapping_dim() as u32).unwrap();
    b.write_f64::<LE>(enc.scale()).unwrap();
    b.write_u32::<LE>(sizes.len() as u32).unwrap();
    for &s in sizes {
        b.write_u32::<LE>(s as u32).unwrap();
    }
    for d in model.domain() {
        b.write_u32::<LE>(d as u32).unwrap();
    }
    for v in enc.freqs().iter().flatten() {
        b.write_f32::<LE>(*v as f32).unwrap();
    }
    for v in model.mlp().params() {
        b.write_f32::<LE>(*v as f32).unwrap();
    }
    b
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<VelocityFieldModel> {
    let bad = |m: &str| Error::format(path, m.to_string());
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| bad("file too short"))?;
    if &magic != MAGIC {
        return Err(bad("not a velocity model file"));
    }
    let eof = |_| bad("truncated model file");
    let version = r.read_u32::<LE>().map_err(eof)?;
    if version != MODEL_VERSION {
        return Err(Error::Unsupported {
            path: path.into(),
            what: format!("model format version {version}"),
        });
    }
    let l = r.read_u32::<LE>().map_err(eof)? as usize;
    let scale = r.read_f64::<LE>().map_err(eof)?;
    let n = r.read_u32::<LE>().map_err(eof)? as usize;
    if !(2..=64).contains(&n) || l == 0 || l > 1 << 16 {
        return Err(bad("implausible model shape"));
    }
    let sizes = (0..n)
        .map(|_| r.read_u32::<LE>().map(|s| s as usize))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(eof)?;
    let mut domain = [0usize; 3];
    for d in &mut domain {
        *d = r.read_u32::<LE>().map_err(eof)? as usize;
    }
    let mut freqs = Vec::with_capacity(l);
    for _ in 0..l {
        let mut row = [0.0; 4];
        for v in &mut row {
            *v = f64::from(r.read_f32::<LE>().map_err(eof)?);
        }
        freqs.push(row);
    }
    let count: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let remaining = bytes.len() - r.position() as usize;
    if remaining != count * 4 {
        return Err(bad("parameter block size does not match layer widths"));
    }
    let params = (0..count)
        .map(|_| r.read_f32::<LE>().map(f64::from))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(eof)?;
    let encoding = FourierEncoding::from_matrix(freqs, scale)?;
    let mlp = Mlp::from_params(&sizes, params)?;
    Ok(VelocityFieldModel::from_parts(encoding, mlp, domain)?)
}

/// Writes the model and its sidecar.
pub fn write_model(
    path: impl AsRef<Path>,
    model: &VelocityFieldModel,
    meta: &ModelMetadata,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_vec_pretty(meta).expect("metadata serializes");
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<VelocityFieldModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}

pub fn read_metadata(path: impl AsRef<Path>) -> Result<ModelMetadata> {
    let side = sidecar_path(path.as_ref());
    let bytes = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(&side, e.to_string()))
}
