use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{LabelMask, Volume};
use crate::error::{bail, Result};

const OTSU_BINS: usize = 256;

/// Otsu threshold over all voxel intensities (256 bins over min..max).
/// Voxels strictly above the returned value are foreground.
pub fn otsu_threshold(vol: &Volume) -> Result<f32> {
    let (lo, hi) = super::intensity_range(vol, None)?;
    if hi <= lo {
        bail!(Degenerate, "volume has no intensity contrast");
    }
    let width = (f64::from(hi) - f64::from(lo)) / OTSU_BINS as f64;
    let mut hist = [0u64; OTSU_BINS];
    for v in vol.data() {
        let b = ((f64::from(*v) - f64::from(lo)) / width) as usize;
        hist[b.min(OTSU_BINS - 1)] += 1;
    }
    let total = vol.data().len() as f64;
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, c)| i as f64 * *c as f64)
        .sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_bin) = (-1.0, 0usize);
    for (i, c) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += *c as f64;
        sum0 += i as f64 * *c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_bin = i;
        }
    }
    Ok((f64::from(lo) + (best_bin + 1) as f64 * width) as f32)
}

const NEIGHBORS6: [[isize; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

#[inline]
fn offset(p: [usize; 3], d: [isize; 3], dims: [usize; 3]) -> Option<[usize; 3]> {
    let mut out = [0usize; 3];
    for k in 0..3 {
        let c = p[k] as isize + d[k];
        if c < 0 || c >= dims[k] as isize {
            return None;
        }
        out[k] = c as usize;
    }
    Some(out)
}

/// Largest 6-connected component of the nonzero voxels, as a binary mask.
pub fn largest_component(mask: &LabelMask) -> LabelMask {
    let g = mask.grid();
    let dims = g.dims();
    let mut label = alloc::vec![0u32; g.len()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..g.len() {
        if !mask.contains(start) || label[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        label[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let p = g.coords(i);
            for d in NEIGHBORS6 {
                if let Some(q) = offset(p, d, dims) {
                    let j = g.index(q[0], q[1], q[2]);
                    if mask.contains(j) && label[j] == 0 {
                        label[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    let keep = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i as u32 + 1);
    let data = label.iter().map(|l| u8::from(Some(*l) == keep)).collect();
    LabelMask::new(g.clone(), data).expect("same grid")
}

fn ball(radius: usize) -> Vec<[isize; 3]> {
    let r = radius as isize;
    let mut out = Vec::new();
    for z in -r..=r {
        for y in -r..=r {
            for x in -r..=r {
                if x * x + y * y + z * z <= r * r {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

/// Binary dilation with a digital ball of `radius` voxels.
pub fn dilate(mask: &LabelMask, radius: usize) -> LabelMask {
    let se = ball(radius);
    let g = mask.grid();
    let dims = g.dims();
    LabelMask::from_fn(g.clone(), |x, y, z| {
        u8::from(
            se.iter().any(|d| {
                offset([x, y, z], *d, dims).is_some_and(|q| mask.get(q[0], q[1], q[2]) != 0)
            }),
        )
    })
}

/// Binary erosion with a digital ball of `radius` voxels. Neighbours outside
/// the grid do not erode.
pub fn erode(mask: &LabelMask, radius: usize) -> LabelMask {
    let se = ball(radius);
    let g = mask.grid();
    let dims = g.dims();
    LabelMask::from_fn(g.clone(), |x, y, z| {
        u8::from(
            mask.get(x, y, z) != 0
                && se.iter().all(|d| {
                    offset([x, y, z], *d, dims).is_none_or(|q| mask.get(q[0], q[1], q[2]) != 0)
                }),
        )
    })
}

/// Heuristic brain mask: Otsu foreground, largest 6-connected component,
/// closing with a radius-2 ball, then the largest component again.
pub fn estimate_brain_mask(vol: &Volume) -> Result<LabelMask> {
    if vol.data().iter().all(|v| *v == 0.0) {
        bail!(Degenerate, "volume has no foreground");
    }
    let t = otsu_threshold(vol)?;
    let fg = LabelMask::new(
        vol.grid().clone(),
        vol.data().iter().map(|v| u8::from(*v > t)).collect(),
    )?;
    if fg.count_nonzero() == 0 {
        bail!(Degenerate, "Otsu threshold leaves no foreground");
    }
    let main = largest_component(&fg);
    let closed = erode(&dilate(&main, 2), 2);
    Ok(largest_component(&closed))
}
