use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::volume::{GridSpec, LabelMask};

const FAR: f64 = 1e20;

/// Per-voxel signed Euclidean distance in voxel units, positive inside.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDistanceField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl SignedDistanceField {
    /// Wraps precomputed distances.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            bail!(
                Argument,
                "distance field has {} values for {} voxels",
                values.len(),
                grid.len()
            );
        }
        if values.iter().any(|v| !v.is_finite()) {
            bail!(Data, "distance field has non-finite values");
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.grid.index(x, y, z)]
    }
}

/// Lower envelope of parabolas rooted at `f`, written to `out`.
fn dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], zb: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    zb[0] = f64::NEG_INFINITY;
    zb[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        let meet = |p: usize| {
            let pf = p as f64;
            ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
        };
        let mut s = meet(v[k]);
        while s <= zb[k] {
            k -= 1;
            s = meet(v[k]);
        }
        k += 1;
        v[k] = q;
        zb[k] = s;
        zb[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while zb[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance from each voxel to the nearest voxel with `feature`
/// set, by separable passes along x, y and z.
pub(crate) fn squared_edt(dims: [usize; 3], feature: impl Fn(usize) -> bool) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let len = nx * ny * nz;
    let mut d: Vec<f64> = (0..len)
        .map(|i| if feature(i) { 0.0 } else { FAR })
        .collect();
    let n = nx.max(ny).max(nz);
    let (mut line, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut zb) = (vec![0usize; n], vec![0.0; n + 1]);
    let strides = [1, nx, nx * ny];
    for axis in 0..3 {
        let m = dims[axis];
        let stride = strides[axis];
        for start in 0..len {
            if (start / stride) % m != 0 {
                continue;
            }
            for (i, l) in line[..m].iter_mut().enumerate() {
                *l = d[start + i * stride];
            }
            dt_1d(&line[..m], &mut out[..m], &mut v, &mut zb);
            for (i, o) in out[..m].iter().enumerate() {
                d[start + i * stride] = *o;
            }
        }
    }
    d
}

/// Exact signed distance to the mask boundary under the voxel-center metric:
/// inside voxels get the distance to the nearest background voxel, outside
/// voxels minus the distance to the nearest foreground voxel.
pub fn signed_distance(mask: &LabelMask) -> Result<SignedDistanceField> {
    let fg = mask.count_nonzero();
    if fg == 0 {
        bail!(Degenerate, "signed distance of an empty mask");
    }
    if fg == mask.data().len() {
        bail!(Degenerate, "signed distance of a mask with no background");
    }
    let m = mask.data();
    let to_bg = squared_edt(mask.dims(), |i| m[i] == 0);
    let to_fg = squared_edt(mask.dims(), |i| m[i] != 0);
    let values = m
        .iter()
        .zip(to_bg.iter().zip(&to_fg))
        .map(|(&l, (&b, &f))| {
            if l != 0 {
                libm::sqrt(b)
            } else {
                -libm::sqrt(f)
            }
        })
        .collect();
    Ok(SignedDistanceField {
        grid: mask.grid().clone(),
        values,
    })
}
