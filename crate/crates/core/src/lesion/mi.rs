use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::volume::{check_region, LabelMask, Volume};

#[inline]
fn bin_of(v: f64, lo: f64, scale: f64, bins: usize) -> usize {
    (((v - lo) * scale) as usize).min(bins - 1)
}

fn range(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Bin indices over `[min, max]` of `xs`; a constant input lands in bin 0.
pub(crate) fn bin_indices(xs: &[f64], bins: usize) -> Vec<usize> {
    let (lo, hi) = range(xs);
    let scale = if hi > lo {
        bins as f64 / (hi - lo)
    } else {
        0.0
    };
    xs.iter().map(|&v| bin_of(v, lo, scale, bins)).collect()
}

fn entropy(counts: &[u32], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = f64::from(c) / n;
            -p * libm::log(p)
        })
        .sum()
}

/// Mutual information (nats) of paired samples under hard binning.
pub(crate) fn mi_from_samples(a: &[f64], b: &[f64], bins: usize) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let ia = bin_indices(a, bins);
    let ib = bin_indices(b, bins);
    let mut joint = vec![0u32; bins * bins];
    let mut ha = vec![0u32; bins];
    let mut hb = vec![0u32; bins];
    for (&i, &j) in ia.iter().zip(&ib) {
        joint[i * bins + j] += 1;
        ha[i] += 1;
        hb[j] += 1;
    }
    let n = a.len() as f64;
    (entropy(&ha, n) + entropy(&hb, n) - entropy(&joint, n)).max(0.0)
}

pub(crate) fn region_samples(vol: &Volume, region: &LabelMask) -> Vec<f64> {
    vol.data()
        .iter()
        .zip(region.data())
        .filter(|(_, &m)| m != 0)
        .map(|(&v, _)| f64::from(v))
        .collect()
}

/// Mutual information of `a` and `b` over the voxels of `region`, from a
/// `bins`×`bins` joint histogram spanning each image's range in the region.
pub fn mutual_information(a: &Volume, b: &Volume, region: &LabelMask, bins: usize) -> Result<f64> {
    if a.dims() != b.dims() {
        bail!(
            Argument,
            "volumes differ in dims: {:?} vs {:?}",
            a.dims(),
            b.dims()
        );
    }
    if bins < 2 {
        bail!(Argument, "need at least 2 bins, got {bins}");
    }
    check_region(a.dims(), region)?;
    Ok(mi_from_samples(
        &region_samples(a, region),
        &region_samples(b, region),
        bins,
    ))
}
