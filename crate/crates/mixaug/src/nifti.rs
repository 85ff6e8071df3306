//! NIfTI-1 single-file images (`.nii`, `.nii.gz`), little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian as LE};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use mixaug_core::linalg::{Mat4, IDENTITY4};
use mixaug_core::volume::{GridSpec, LabelMask, Volume};

use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const MAGIC: &[u8; 4] = b"n+1\0";

pub const DT_UINT8: i16 = 2;
pub const DT_INT16: i16 = 4;
pub const DT_INT32: i16 = 8;
pub const DT_FLOAT32: i16 = 16;
pub const DT_FLOAT64: i16 = 64;

/// Voxel payload in its stored type.
#[derive(Debug, Clone, PartialEq)]
pub enum NiftiData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    I32(Vec<i32>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl NiftiData {
    pub fn datatype(&self) -> i16 {
        match self {
            NiftiData::U8(_) => DT_UINT8,
            NiftiData::I16(_) => DT_INT16,
            NiftiData::I32(_) => DT_INT32,
            NiftiData::F32(_) => DT_FLOAT32,
            NiftiData::F64(_) => DT_FLOAT64,
        }
    }

    fn bytes_per_voxel(datatype: i16) -> Option<usize> {
        Some(match datatype {
            DT_UINT8 => 1,
            DT_INT16 => 2,
            DT_INT32 | DT_FLOAT32 => 4,
            DT_FLOAT64 => 8,
            _ => return None,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            NiftiData::U8(v) => v.len(),
            NiftiData::I16(v) => v.len(),
            NiftiData::I32(v) => v.len(),
            NiftiData::F32(v) => v.len(),
            NiftiData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn value(&self, i: usize) -> f64 {
        match self {
            NiftiData::U8(v) => f64::from(v[i]),
            NiftiData::I16(v) => f64::from(v[i]),
            NiftiData::I32(v) => f64::from(v[i]),
            NiftiData::F32(v) => f64::from(v[i]),
            NiftiData::F64(v) => v[i],
        }
    }

    fn decode(datatype: i16, raw: &[u8]) -> Self {
        match datatype {
            DT_UINT8 => NiftiData::U8(raw.to_vec()),
            DT_INT16 => {
                let mut v = vec![0; raw.len() / 2];
                LE::read_i16_into(raw, &mut v);
                NiftiData::I16(v)
            }
            DT_INT32 => {
                let mut v = vec![0; raw.len() / 4];
                LE::read_i32_into(raw, &mut v);
                NiftiData::I32(v)
            }
            DT_FLOAT32 => {
                let mut v = vec![0.0; raw.len() / 4];
                LE::read_f32_into(raw, &mut v);
                NiftiData::F32(v)
            }
            DT_FLOAT64 => {
                let mut v = vec![0.0; raw.len() / 8];
                LE::read_f64_into(raw, &mut v);
                NiftiData::F64(v)
            }
            _ => unreachable!("datatype checked by caller"),
        }
    }

    fn encode(&self) -> Vec<u8> {
        match self {
            NiftiData::U8(v) => v.clone(),
            NiftiData::I16(v) => {
                let mut b = vec![0; v.len() * 2];
                LE::write_i16_into(v, &mut b);
                b
            }
            NiftiData::I32(v) => {
                let mut b = vec![0; v.len() * 4];
                LE::write_i32_into(v, &mut b);
                b
            }
            NiftiData::F32(v) => {
                let mut b = vec![0; v.len() * 4];
                LE::write_f32_into(v, &mut b);
                b
            }
            NiftiData::F64(v) => {
                let mut b = vec![0; v.len() * 8];
                LE::write_f64_into(v, &mut b);
                b
            }
        }
    }
}

/// A decoded image: geometry, stored payload and intensity scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiImage {
    pub grid: GridSpec,
    pub data: NiftiData,
    pub scl_slope: f32,
    pub scl_inter: f32,
}

impl NiftiImage {
    pub fn new(grid: GridSpec, data: NiftiData) -> Self {
        Self {
            grid,
            data,
            scl_slope: 1.0,
            scl_inter: 0.0,
        }
    }

    /// Stored value at `i` after `scl_slope`/`scl_inter`; a zero slope
    /// means no scaling.
    pub fn scaled(&self, i: usize) -> f64 {
        let v = self.data.value(i);
        if self.scl_slope != 0.0 && self.scl_slope.is_finite() {
            v * f64::from(self.scl_slope) + f64::from(self.scl_inter)
        } else {
            v
        }
    }

    pub fn to_volume(&self) -> mixaug_core::Result<Volume> {
        let data = (0..self.data.len())
            .map(|i| self.scaled(i) as f32)
            .collect();
        Volume::new(self.grid.clone(), data)
    }

    pub fn to_mask(&self) -> mixaug_core::Result<LabelMask> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.data.len() {
            let v = self.scaled(i);
            if !((0.0..=255.0).contains(&v) && v.fract() == 0.0) {
                return Err(mixaug_core::Error::Data(format!(
                    "label value {v} is not an integer in 0..=255"
                )));
            }
            out.push(v as u8);
        }
        LabelMask::new(self.grid.clone(), out)
    }
}

impl From<&Volume> for NiftiImage {
    fn from(v: &Volume) -> Self {
        Self::new(v.grid().clone(), NiftiData::F32(v.data().to_vec()))
    }
}

impl From<&LabelMask> for NiftiImage {
    fn from(m: &LabelMask) -> Self {
        Self::new(m.grid().clone(), NiftiData::U8(m.data().to_vec()))
    }
}

fn is_gzip_path(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn f32_at(h: &[u8], off: usize) -> f32 {
    LE::read_f32(&h[off..off + 4])
}

fn i16_at(h: &[u8], off: usize) -> i16 {
    LE::read_i16(&h[off..off + 2])
}

fn quaternion_affine(h: &[u8], spacing: [f64; 3]) -> Mat4 {
    let [b, c, d] = [256, 260, 264].map(|o| f64::from(f32_at(h, o)));
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let qfac = if f32_at(h, 76) < 0.0 { -1.0 } else { 1.0 };
    let r = [
        [
            a * a + b * b - c * c - d * d,
            2.0 * (b * c - a * d),
            2.0 * (b * d + a * c),
        ],
        [
            2.0 * (b * c + a * d),
            a * a + c * c - b * b - d * d,
            2.0 * (c * d - a * b),
        ],
        [
            2.0 * (b * d - a * c),
            2.0 * (c * d + a * b),
            a * a + d * d - c * c - b * b,
        ],
    ];
    let offset = [268, 272, 276].map(|o| f64::from(f32_at(h, o)));
    let scale = [spacing[0], spacing[1], spacing[2] * qfac];
    let mut m = IDENTITY4;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = r[i][j] * scale[j];
        }
        m[i][3] = offset[i];
    }
    m
}

/// Parses an uncompressed NIfTI-1 byte stream. `path` is used in errors only.
pub fn decode(bytes: &[u8], path: &Path) -> Result<NiftiImage> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::format(
            path,
            format!("file too short for a header ({} bytes)", bytes.len()),
        ));
    }
    let h = &bytes[..HEADER_SIZE];
    let sizeof_hdr = LE::read_i32(&h[0..4]);
    if sizeof_hdr != HEADER_SIZE as i32 {
        if sizeof_hdr.swap_bytes() == HEADER_SIZE as i32 {
            return Err(Error::Unsupported {
                path: path.into(),
                what: "big-endian byte order".into(),
            });
        }
        return Err(Error::format(
            path,
            format!("header size field is {sizeof_hdr}, expected 348"),
        ));
    }
    if &h[344..348] != MAGIC {
        return Err(Error::format(
            path,
            "magic is not \"n+1\" (single-file NIfTI-1)",
        ));
    }
    let dim: Vec<i16> = (0..8).map(|k| i16_at(h, 40 + 2 * k)).collect();
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::format(path, format!("dim[0] = {ndim} out of range")));
    }
    let mut dims = [1usize; 3];
    for k in 0..3 {
        if (k as i16) < ndim {
            if dim[k + 1] < 1 {
                return Err(Error::format(
                    path,
                    format!("dim[{}] = {} is not positive", k + 1, dim[k + 1]),
                ));
            }
            dims[k] = dim[k + 1] as usize;
        }
    }
    if (4..=ndim as usize).any(|k| dim[k] > 1) {
        return Err(Error::Unsupported {
            path: path.into(),
            what: "4D or multi-channel image".into(),
        });
    }
    let datatype = i16_at(h, 70);
    let Some(bpv) = NiftiData::bytes_per_voxel(datatype) else {
        return Err(Error::Unsupported {
            path: path.into(),
            what: format!("datatype code {datatype}"),
        });
    };
    let vox_offset = f32_at(h, 108);
    if vox_offset.is_nan() || vox_offset < HEADER_SIZE as f32 || vox_offset.fract() != 0.0 {
        return Err(Error::format(
            path,
            format!("vox_offset {vox_offset} is invalid"),
        ));
    }
    let start = vox_offset as usize;
    let n = dims.iter().product::<usize>();
    let end = start + n * bpv;
    if bytes.len() < end {
        return Err(Error::format(
            path,
            format!("payload truncated: need {end} bytes, have {}", bytes.len()),
        ));
    }

    let spacing: [f64; 3] = core::array::from_fn(|k| {
        let p = f64::from(f32_at(h, 80 + 4 * k)).abs();
        if p > 0.0 && p.is_finite() {
            p
        } else {
            1.0
        }
    });
    let (qform, sform) = (i16_at(h, 252), i16_at(h, 254));
    let affine = if sform > 0 {
        let mut m = IDENTITY4;
        for (i, row) in m.iter_mut().take(3).enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = f64::from(f32_at(h, 280 + 16 * i + 4 * j));
            }
        }
        m
    } else if qform > 0 {
        quaternion_affine(h, spacing)
    } else {
        let mut m = IDENTITY4;
        for k in 0..3 {
            m[k][k] = spacing[k];
        }
        m
    };
    let grid = GridSpec::new(dims, affine)
        .map_err(|e| Error::format(path, format!("bad geometry: {e}")))?;
    Ok(NiftiImage {
        grid,
        data: NiftiData::decode(datatype, &bytes[start..end]),
        scl_slope: f32_at(h, 112),
        scl_inter: f32_at(h, 116),
    })
}

/// Serializes to an uncompressed NIfTI-1 byte stream with s-form code 1.
pub fn encode(img: &NiftiImage) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    LE::write_i32(&mut h[0..4], HEADER_SIZE as i32);
    h[38] = b'r';
    let dims = img.grid.dims();
    LE::write_i16(&mut h[40..42], 3);
    for k in 0..3 {
        LE::write_i16(&mut h[42 + 2 * k..44 + 2 * k], dims[k] as i16);
    }
    for k in 3..7 {
        LE::write_i16(&mut h[42 + 2 * k..44 + 2 * k], 1);
    }
    let dt = img.data.datatype();
    LE::write_i16(&mut h[70..72], dt);
    LE::write_i16(
        &mut h[72..74],
        8 * NiftiData::bytes_per_voxel(dt).unwrap_or(1) as i16,
    );
    let sp = img.grid.spacing();
    LE::write_f32(&mut h[76..80], 1.0);
    for k in 0..3 {
        LE::write_f32(&mut h[80 + 4 * k..84 + 4 * k], sp[k] as f32);
    }
    LE::write_f32(&mut h[108..112], VOX_OFFSET as f32);
    LE::write_f32(&mut h[112..116], img.scl_slope);
    LE::write_f32(&mut h[116..120], img.scl_inter);
    h[123] = 2; // millimetres
    LE::write_i16(&mut h[254..256], 1);
    let a = img.grid.affine();
    for i in 0..3 {
        for j in 0..4 {
            LE::write_f32(
                &mut h[280 + 16 * i + 4 * j..284 + 16 * i + 4 * j],
                a[i][j] as f32,
            );
        }
    }
    h[344..348].copy_from_slice(MAGIC);
    h.extend_from_slice(&img.data.encode());
    h
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<NiftiImage> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::format(path, format!("gzip stream: {e}")))?;
        decode(&out, path)
    } else {
        decode(&raw, path)
    }
}

/// Writes `img`, gzip-compressed when the path ends in `.gz`.
pub fn write_nifti(path: impl AsRef<Path>, img: &NiftiImage) -> Result<()> {
    let path = path.as_ref();
    if img.grid.dims().iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::Unsupported {
            path: path.into(),
            what: format!(
                "dimensions {:?} (NIfTI-1 stores them as i16)",
                img.grid.dims()
            ),
        });
    }
    let bytes = encode(img);
    let bytes = if is_gzip_path(path) {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    Ok(read_nifti(path)?.to_volume()?)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    Ok(read_nifti(path)?.to_mask()?)
}

pub fn write_volume(path: impl AsRef<Path>, vol: &Volume) -> Result<()> {
    write_nifti(path, &NiftiImage::from(vol))
}

pub fn write_mask(path: impl AsRef<Path>, mask: &LabelMask) -> Result<()> {
    write_nifti(path, &NiftiImage::from(mask))
}
