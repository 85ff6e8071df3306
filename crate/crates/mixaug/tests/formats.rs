//! On-disk formats: NIfTI-1, model, displacement field, rigid transform and
//! pool manifest round trips, plus header-level checks against hand-built
//! bytes.

use std::fs;

use mixaug::field_file::{read_displacement, write_displacement};
use mixaug::model_file::{read_metadata, read_model, sidecar_path, write_model, ModelMetadata};
use mixaug::nifti::{
    decode, encode, read_mask, read_nifti, read_volume, write_mask, write_nifti, write_volume,
    NiftiData, NiftiImage,
};
use mixaug::pool::{read_manifest, write_manifest};
use mixaug::transform_file::{read_transform, write_transform};
use mixaug::Error;
use mixaug_core::inr::{DeformationField, ModelArch, RegistrationConfig, VelocityFieldModel};
use mixaug_core::lesion::RigidTransform;
use mixaug_core::mixing::MixWeights;
use mixaug_core::pool::{PoolManifest, Provenance, SampleEntry, SampleKind, SkipRecord};
use mixaug_core::volume::{GridSpec, LabelMask, Volume};
use tempfile::tempdir;

fn oblique_grid(dims: [usize; 3]) -> GridSpec {
    let (c, s) = (0.8f64, 0.6f64);
    GridSpec::new(
        dims,
        [
            [1.5 * c, -1.5 * s, 0.0, -12.0],
            [1.5 * s, 1.5 * c, 0.0, 7.5],
            [0.0, 0.0, 2.0, 3.25],
            [0.0, 0.0, 0.0, 1.0],
        ],
    )
    .unwrap()
}

fn payloads(n: usize) -> Vec<NiftiData> {
    vec![
        NiftiData::U8((0..n).map(|i| (i * 7 % 256) as u8).collect()),
        NiftiData::I16(
            (0..n)
                .map(|i| (i as i16).wrapping_mul(211).wrapping_sub(300))
                .collect(),
        ),
        NiftiData::I32((0..n).map(|i| (i as i32 - 250) * 100_003).collect()),
        NiftiData::F32((0..n).map(|i| (i as f32 * 0.37).sin() * 1e3).collect()),
        NiftiData::F64((0..n).map(|i| (i as f64 * 0.11).cos() / 3.0).collect()),
    ]
}

#[test]
fn nifti_round_trip_every_datatype() {
    let dir = tempdir().unwrap();
    let grid = oblique_grid([8, 8, 8]);
    for data in payloads(512) {
        for name in ["x.nii", "x.nii.gz"] {
            let path = dir.path().join(name);
            let img = NiftiImage::new(grid.clone(), data.clone());
            write_nifti(&path, &img).unwrap();
            let back = read_nifti(&path).unwrap();
            assert_eq!(back.data, data, "{name}");
            assert!(back.grid.same_geometry(&grid, 1e-6));
        }
    }
}

#[test]
fn gzip_is_chosen_by_suffix_and_detected_by_magic() {
    let dir = tempdir().unwrap();
    let vol = Volume::from_fn(GridSpec::unit([5, 4, 3]), |x, y, z| {
        (x + 10 * y + 100 * z) as f32
    })
    .unwrap();
    let gz = dir.path().join("a.nii.gz");
    let plain = dir.path().join("a.nii");
    write_volume(&gz, &vol).unwrap();
    write_volume(&plain, &vol).unwrap();
    assert_eq!(&fs::read(&gz).unwrap()[..2], &[0x1f, 0x8b]);
    assert_eq!(&fs::read(&plain).unwrap()[344..348], b"n+1\0");
    let renamed = dir.path().join("compressed_but_named.nii");
    fs::copy(&gz, &renamed).unwrap();
    assert_eq!(read_volume(&renamed).unwrap(), vol);
    assert_eq!(read_volume(&plain).unwrap(), vol);
}

#[test]
fn scaling_applies_slope_and_intercept() {
    let mut img = NiftiImage::new(GridSpec::unit([1, 1, 1]), NiftiData::I16(vec![3]));
    img.scl_slope = 2.0;
    img.scl_inter = 1.0;
    let back = decode(&encode(&img), "s.nii".as_ref()).unwrap();
    assert_eq!(back.to_volume().unwrap().data(), &[7.0]);
    img.scl_slope = 0.0;
    let back = decode(&encode(&img), "s.nii".as_ref()).unwrap();
    assert_eq!(back.to_volume().unwrap().data(), &[3.0]);
}

fn le_i16(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn le_f32(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

#[test]
fn header_fields_are_echoed() {
    let grid = GridSpec::with_spacing([2, 2, 2], [1.0, 1.0, 1.0]).unwrap();
    let bytes = encode(&NiftiImage::from(&Volume::zeros(grid)));
    assert_eq!(i32::from_le_bytes(bytes[0..4].try_into().unwrap()), 348);
    assert_eq!(&bytes[344..348], b"n+1\0");
    assert_eq!(
        (0..4)
            .map(|k| le_i16(&bytes, 40 + 2 * k))
            .collect::<Vec<_>>(),
        [3, 2, 2, 2]
    );
    assert_eq!(
        (0..3)
            .map(|k| le_f32(&bytes, 80 + 4 * k))
            .collect::<Vec<_>>(),
        [1.0, 1.0, 1.0]
    );
    assert_eq!(le_i16(&bytes, 70), 16);
    assert_eq!(le_i16(&bytes, 254), 1);
    assert_eq!(le_f32(&bytes, 108), 352.0);
}

#[test]
fn zero_payload_is_256_bytes_of_float_zeros() {
    let bytes = encode(&NiftiImage::from(&Volume::zeros(GridSpec::unit([4, 4, 4]))));
    assert_eq!(bytes.len(), 352 + 256);
    assert!(bytes[352..].iter().all(|&b| b == 0));
    let back = decode(&bytes, "z.nii".as_ref()).unwrap();
    assert_eq!(back.data, NiftiData::F32(vec![0.0; 64]));
}

#[test]
fn masks_are_stored_as_uint8() {
    let dir = tempdir().unwrap();
    let mask = LabelMask::from_fn(GridSpec::unit([3, 3, 3]), |x, y, z| ((x + y + z) % 3) as u8);
    let path = dir.path().join("m.nii.gz");
    write_mask(&path, &mask).unwrap();
    assert_eq!(read_nifti(&path).unwrap().data.datatype(), 2);
    assert_eq!(read_mask(&path).unwrap(), mask);
}

#[test]
fn fractional_labels_are_rejected() {
    let img = NiftiImage::new(GridSpec::unit([2, 1, 1]), NiftiData::F32(vec![1.0, 0.5]));
    assert!(img.to_mask().is_err());
}

#[test]
fn malformed_headers_are_reported() {
    let good = encode(&NiftiImage::from(&Volume::zeros(GridSpec::unit([2, 2, 2]))));
    let p = "bad.nii".as_ref();

    let mut magic = good.clone();
    magic[344..348].copy_from_slice(b"abcd");
    assert!(matches!(decode(&magic, p), Err(Error::Format { .. })));

    let mut size = good.clone();
    size[0..4].copy_from_slice(&340i32.to_le_bytes());
    assert!(matches!(decode(&size, p), Err(Error::Format { .. })));

    let mut big_endian = good.clone();
    big_endian[0..4].copy_from_slice(&348i32.to_be_bytes());
    assert!(matches!(
        decode(&big_endian, p),
        Err(Error::Unsupported { .. })
    ));

    let mut dtype = good.clone();
    dtype[70..72].copy_from_slice(&128i16.to_le_bytes());
    assert!(matches!(decode(&dtype, p), Err(Error::Unsupported { .. })));

    assert!(matches!(decode(&good[..200], p), Err(Error::Format { .. })));
    assert!(matches!(
        decode(&good[..good.len() - 1], p),
        Err(Error::Format { .. })
    ));
}

#[test]
fn qform_is_used_without_sform() {
    let grid = GridSpec::with_spacing([3, 3, 3], [2.0, 2.0, 2.0]).unwrap();
    let mut bytes = encode(&NiftiImage::from(&Volume::zeros(grid)));
    bytes[254..256].copy_from_slice(&0i16.to_le_bytes());
    bytes[252..254].copy_from_slice(&1i16.to_le_bytes());
    // 90 degrees about z: (b, c, d) = (0, 0, sin 45).
    let s = std::f32::consts::FRAC_1_SQRT_2;
    bytes[264..268].copy_from_slice(&s.to_le_bytes());
    bytes[268..272].copy_from_slice(&5f32.to_le_bytes());
    let img = decode(&bytes, "q.nii".as_ref()).unwrap();
    let p = img.grid.voxel_to_world([1.0, 0.0, 0.0]);
    assert!(
        (p[0] - 5.0).abs() < 1e-6 && (p[1] - 2.0).abs() < 1e-6 && p[2].abs() < 1e-6,
        "{p:?}"
    );
}

#[test]
fn model_round_trip_is_bitwise() {
    let dir = tempdir().unwrap();
    let arch = ModelArch {
        mapping_dim: 6,
        freq_scale: 2.0,
        hidden: vec![9, 5],
    };
    let model = VelocityFieldModel::new(&arch, [7, 6, 5], 42).unwrap();
    let path = dir.path().join("m.mxvf");
    let cfg = RegistrationConfig {
        arch,
        ..Default::default()
    };
    write_model(
        &path,
        &model,
        &ModelMetadata::new(GridSpec::unit([7, 6, 5]), cfg.clone(), None),
    )
    .unwrap();
    let back = read_model(&path).unwrap();
    assert_eq!(back, model);
    let p = [1.25, 4.5, 0.75];
    assert_eq!(back.query_velocity(p, 0.3), model.query_velocity(p, 0.3));
    assert!(sidecar_path(&path).exists());
    assert_eq!(read_metadata(&path).unwrap().config, cfg);

    let mut bytes = fs::read(&path).unwrap();
    bytes[0] = b'X';
    fs::write(&path, &bytes).unwrap();
    assert!(read_model(&path).is_err());
}

#[test]
fn displacement_round_trip() {
    let dir = tempdir().unwrap();
    let grid = GridSpec::unit([4, 3, 2]);
    let map = (0..grid.len())
        .map(|i| {
            let [x, y, z] = grid.coords(i);
            [
                x as f64 + 0.5,
                y as f64 - 0.25,
                z as f64 + (i as f64 * 0.1).sin(),
            ]
        })
        .collect();
    let field = DeformationField::from_map(grid, map).unwrap();
    let path = dir.path().join("u.f32");
    write_displacement(&path, &field).unwrap();
    let back = read_displacement(&path).unwrap();
    assert_eq!(back.grid(), field.grid());
    assert!(back.max_abs_diff(&field) < 1e-6);
    assert_eq!(fs::metadata(&path).unwrap().len(), 24 * 3 * 4);
}

#[test]
fn transform_round_trip() {
    let dir = tempdir().unwrap();
    let t = RigidTransform::from_euler_zyx([0.1, -0.2, 0.3], [4.0, -3.0, 2.0], [10.0, 12.0, 8.0]);
    let path = dir.path().join("t.txt");
    write_transform(&path, &t).unwrap();
    let back = read_transform(&path).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!((back.matrix()[i][j] - t.matrix()[i][j]).abs() < 1e-8);
        }
    }
    fs::write(&path, "1 0 0 0\n0 2 0 0\n0 0 1 0\n0 0 0 1\n").unwrap();
    assert!(read_transform(&path).is_err());
}

fn manifest() -> PoolManifest {
    let entries = vec![
        SampleEntry::real("c0", "/data/c0.nii.gz", "/data/c0_seg.nii.gz"),
        SampleEntry::real("c1", "/data/c1.nii.gz", "/data/c1_seg.nii.gz"),
        SampleEntry::synthetic(
            "spatial-c0-000",
            "spatial/spatial-c0-000_image.nii.gz",
            "spatial/spatial-c0-000_mask.nii.gz",
            Provenance::Spatial {
                source: "c0".into(),
                targets: ["c1".into(), "c2".into()],
                weights: MixWeights::new(0.3).unwrap(),
                seed: 99,
                config_hash: "0123456789abcdef".into(),
            },
        ),
        SampleEntry::synthetic(
            "semantic-h0-000",
            "semantic/semantic-h0-000_image.nii.gz",
            "semantic/semantic-h0-000_mask.nii.gz",
            Provenance::Semantic {
                lesion: "c1".into(),
                healthy: "h0".into(),
                seed: 5,
                config_hash: "fedcba9876543210".into(),
            },
        ),
    ];
    let skipped = vec![SkipRecord {
        id: "semantic-h0-001".into(),
        kind: SampleKind::SemanticAug,
        reason: "placement_failed".into(),
    }];
    PoolManifest::new(7, 0.5, entries, skipped).unwrap()
}

#[test]
fn manifest_round_trip() {
    let dir = tempdir().unwrap();
    let m = manifest();
    let path = dir.path().join("manifest.json");
    write_manifest(&path, &m).unwrap();
    let back = read_manifest(&path).unwrap();
    assert_eq!(back, m);
    let text = fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["counts"]["spatial_aug"], 1);

    fs::write(&path, text.replace("\"real\": 2", "\"real\": 3")).unwrap();
    assert!(read_manifest(&path).is_err());
}
