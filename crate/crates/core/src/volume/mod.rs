//! Volume and label-mask data model, sampling, resampling and intensity
//! normalization.
//!
//! Voxels are stored with x varying fastest: `index = x + nx * (y + ny * z)`,
//! matching the on-disk NIfTI order. Continuous voxel coordinates place
//! voxel centers at integers.

mod grid;
mod intensity;
mod mask;
mod sample;

pub use grid::GridSpec;
pub use intensity::{intensity_range, zscore_normalize};
pub use mask::{dilate, erode, estimate_brain_mask, largest_component, otsu_threshold};
pub(crate) use sample::mapped_coords;
pub use sample::{
    resample_mask, resample_volume, sample_nearest, sample_nearest_value, sample_trilinear,
    sample_trilinear_with_gradient, Interpolation,
};

use alloc::vec::Vec;

use crate::error::{bail, Result};

/// A 3D scalar image with its voxel-to-world geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: GridSpec,
    data: Vec<f32>,
}

impl Volume {
    /// Wraps `data`; rejects a length mismatch or non-finite intensities.
    pub fn new(grid: GridSpec, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            bail!(
                Argument,
                "volume data has {} voxels, grid expects {}",
                data.len(),
                grid.len()
            );
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            bail!(Data, "non-finite intensity at voxel {i}");
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let data = alloc::vec![0.0; grid.len()];
        Self { grid, data }
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel. `f` must return
    /// finite values.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize, usize) -> f32) -> Result<Self> {
        let [nx, ny, nz] = grid.dims();
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(grid, data)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.grid.index(x, y, z)]
    }

    /// Returns a volume with the same geometry and `f` applied to each voxel.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(self.grid.clone(), self.data.iter().map(|v| f(*v)).collect())
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, data: Vec<f32>) -> Self {
        debug_assert_eq!(grid.len(), data.len());
        Self { grid, data }
    }
}

/// A 3D label image (8-bit labels) with its geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    grid: GridSpec,
    data: Vec<u8>,
}

impl LabelMask {
    pub fn new(grid: GridSpec, data: Vec<u8>) -> Result<Self> {
        if data.len() != grid.len() {
            bail!(
                Argument,
                "mask data has {} voxels, grid expects {}",
                data.len(),
                grid.len()
            );
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let data = alloc::vec![0; grid.len()];
        Self { grid, data }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize, usize) -> u8) -> Self {
        let [nx, ny, nz] = grid.dims();
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Self { grid, data }
    }

    /// Binary mask from a predicate over voxels.
    pub fn from_predicate(grid: GridSpec, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        Self::from_fn(grid, |x, y, z| u8::from(f(x, y, z)))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[self.grid.index(x, y, z)]
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.data[index] != 0
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v != 0).count()
    }

    /// Sorted distinct label values present in the mask.
    pub fn labels(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for v in &self.data {
            seen[*v as usize] = true;
        }
        (0..=255u8).filter(|v| seen[*v as usize]).collect()
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|v| *v <= 1)
    }

    /// Collapses every nonzero label to 1.
    pub fn binarize(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.iter().map(|v| u8::from(*v != 0)).collect(),
        }
    }

    /// Voxels set in `self` and not in `other`.
    pub fn difference(&self, other: &LabelMask) -> Result<Self> {
        if self.dims() != other.dims() {
            bail!(
                Argument,
                "mask dims {:?} and {:?} differ",
                self.dims(),
                other.dims()
            );
        }
        Ok(Self {
            grid: self.grid.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| u8::from(*a != 0 && *b == 0))
                .collect(),
        })
    }

    /// Centroid of the nonzero voxels in continuous voxel coordinates.
    pub fn centroid(&self) -> Option<[f64; 3]> {
        let [nx, ny, _] = self.dims();
        let mut sum = [0.0f64; 3];
        let mut n = 0usize;
        for (i, v) in self.data.iter().enumerate() {
            if *v != 0 {
                sum[0] += (i % nx) as f64;
                sum[1] += ((i / nx) % ny) as f64;
                sum[2] += (i / (nx * ny)) as f64;
                n += 1;
            }
        }
        (n > 0).then(|| sum.map(|s| s / n as f64))
    }
}

/// Checks that a region mask can be used with a volume of `dims`.
pub(crate) fn check_region(dims: [usize; 3], region: &LabelMask) -> Result<()> {
    if region.dims() != dims {
        bail!(
            Argument,
            "region dims {:?} do not match volume dims {:?}",
            region.dims(),
            dims
        );
    }
    if region.count_nonzero() == 0 {
        bail!(Argument, "region is empty");
    }
    Ok(())
}
