use alloc::vec::Vec;

use super::{check_region, LabelMask, Volume};
use crate::error::{bail, Result};

/// Min and max intensity over `region` (whole volume when `None`).
pub fn intensity_range(vol: &Volume, region: Option<&LabelMask>) -> Result<(f32, f32)> {
    if let Some(r) = region {
        check_region(vol.dims(), r)?;
    }
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for (i, v) in vol.data().iter().enumerate() {
        if region.is_none_or(|r| r.contains(i)) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    Ok((lo, hi))
}

/// Zero-mean, unit-variance normalization using statistics over `region`
/// (whole volume when `None`). Every voxel is transformed.
pub fn zscore_normalize(vol: &Volume, region: Option<&LabelMask>) -> Result<Volume> {
    if let Some(r) = region {
        check_region(vol.dims(), r)?;
    }
    let selected: Vec<f64> = vol
        .data()
        .iter()
        .enumerate()
        .filter(|(i, _)| region.is_none_or(|r| r.contains(*i)))
        .map(|(_, v)| f64::from(*v))
        .collect();
    let n = selected.len() as f64;
    let mean = selected.iter().sum::<f64>() / n;
    let var = selected
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    let std = libm::sqrt(var);
    if std.is_nan() || std <= 1e-12 * (1.0 + mean.abs()) {
        bail!(Degenerate, "intensity variance over the region is zero");
    }
    vol.map(|v| ((f64::from(v) - mean) / std) as f32)
}
