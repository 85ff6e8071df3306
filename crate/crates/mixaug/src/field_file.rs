//! Raw displacement-field export: interleaved little-endian f32 triples
//! `(ux, uy, uz)` per voxel, x fastest, with a JSON header sidecar.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LE};
use mixaug_core::inr::DeformationField;
use mixaug_core::volume::GridSpec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_file::sidecar_path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub version: u32,
    pub grid: GridSpec,
    pub components: usize,
    pub dtype: String,
    pub quantity: String,
}

pub fn write_displacement(path: impl AsRef<Path>, field: &DeformationField) -> Result<()> {
    let path = path.as_ref();
    let u: Vec<f32> = field
        .displacements()
        .flat_map(|d| d.map(|c| c as f32))
        .collect();
    let mut bytes = vec![0u8; u.len() * 4];
    LE::write_f32_into(&u, &mut bytes);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let header = FieldHeader {
        version: 1,
        grid: field.grid().clone(),
        components: 3,
        dtype: "float32le".into(),
        quantity: "displacement_voxels".into(),
    };
    let side = sidecar_path(path);
    fs::write(
        &side,
        serde_json::to_vec_pretty(&header).expect("header serializes"),
    )
    .map_err(|e| Error::io(&side, e))
}

/// Reads an exported field back as a sampling map `x + u(x)`.
pub fn read_displacement(path: impl AsRef<Path>) -> Result<DeformationField> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let hb = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let header: FieldHeader =
        serde_json::from_slice(&hb).map_err(|e| Error::format(&side, e.to_string()))?;
    if header.components != 3 || header.dtype != "float32le" {
        return Err(Error::Unsupported {
            path: side,
            what: format!("{}-component {} field", header.components, header.dtype),
        });
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let n = header.grid.len();
    if bytes.len() != n * 12 {
        return Err(Error::format(
            path,
            format!("expected {} bytes, found {}", n * 12, bytes.len()),
        ));
    }
    let mut u = vec![0.0f32; n * 3];
    LE::read_f32_into(&bytes, &mut u);
    let map = (0..n)
        .map(|i| {
            let c = header.grid.coords(i);
            core::array::from_fn(|k| c[k] as f64 + f64::from(u[3 * i + k]))
        })
        .collect();
    Ok(DeformationField::from_map(header.grid, map)?)
}
