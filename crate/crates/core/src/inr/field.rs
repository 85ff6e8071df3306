use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::linalg::{mat3_det, Vec3};
use crate::volume::GridSpec;

/// Backward sampling map: for every voxel `x` of `grid`, the continuous
/// source voxel coordinate `Φ(x)` to sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    grid: GridSpec,
    map: Vec<Vec3>,
}

impl DeformationField {
    /// `Φ(x) = x` on `grid`.
    pub fn identity(grid: GridSpec) -> Self {
        let map = (0..grid.len())
            .map(|i| grid.coords(i).map(|c| c as f64))
            .collect();
        Self { grid, map }
    }

    pub fn from_map(grid: GridSpec, map: Vec<Vec3>) -> Result<Self> {
        if map.len() != grid.len() {
            bail!(
                Argument,
                "field has {} vectors, grid expects {}",
                map.len(),
                grid.len()
            );
        }
        if map.iter().flatten().any(|v| !v.is_finite()) {
            bail!(Data, "deformation field has non-finite coordinates");
        }
        Ok(Self { grid, map })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn map(&self) -> &[Vec3] {
        &self.map
    }

    /// `u(x) = Φ(x) - x` at voxel `index`.
    pub fn displacement(&self, index: usize) -> Vec3 {
        let c = self.grid.coords(index);
        let p = self.map[index];
        [p[0] - c[0] as f64, p[1] - c[1] as f64, p[2] - c[2] as f64]
    }

    pub fn displacements(&self) -> impl Iterator<Item = Vec3> + '_ {
        (0..self.map.len()).map(|i| self.displacement(i))
    }

    /// Mean Euclidean displacement length in voxels.
    pub fn mean_displacement(&self) -> f64 {
        let n = self.map.len() as f64;
        self.displacements().map(crate::linalg::norm3).sum::<f64>() / n
    }

    /// Largest coordinate difference to another field on the same grid.
    pub fn max_abs_diff(&self, other: &DeformationField) -> f64 {
        self.map
            .iter()
            .zip(&other.map)
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs()))
            .fold(0.0, f64::max)
    }

    /// Jacobian determinant of `Φ` by central differences at every interior
    /// voxel (voxels with a neighbour on both sides along every axis).
    pub fn interior_jacobian_determinants(&self) -> Vec<f64> {
        let [nx, ny, nz] = self.grid.dims();
        let g = &self.grid;
        let mut out = Vec::new();
        if nx < 3 || ny < 3 || nz < 3 {
            return out;
        }
        for z in 1..nz - 1 {
            for y in 1..ny - 1 {
                for x in 1..nx - 1 {
                    let d = |a: usize, b: usize, k: usize| (self.map[a][k] - self.map[b][k]) / 2.0;
                    let cols = [
                        (g.index(x + 1, y, z), g.index(x - 1, y, z)),
                        (g.index(x, y + 1, z), g.index(x, y - 1, z)),
                        (g.index(x, y, z + 1), g.index(x, y, z - 1)),
                    ];
                    let j: [[f64; 3]; 3] = core::array::from_fn(|r| {
                        core::array::from_fn(|c| d(cols[c].0, cols[c].1, r))
                    });
                    out.push(mat3_det(&j));
                }
            }
        }
        out
    }

    /// Fraction of interior voxels with a positive Jacobian determinant.
    pub fn positive_jacobian_fraction(&self) -> f64 {
        let dets = self.interior_jacobian_determinants();
        if dets.is_empty() {
            return 1.0;
        }
        dets.iter().filter(|d| **d > 0.0).count() as f64 / dets.len() as f64
    }
}
