use alloc::vec::Vec;

use super::{DeformationField, MlpCache, VelocityFieldModel};
use crate::error::{bail, Result};
use crate::linalg::Vec3;
use crate::volume::GridSpec;

/// Anything that can be queried for a velocity at voxel coordinates.
pub trait VelocitySource {
    type Scratch;

    fn scratch(&self) -> Self::Scratch;

    /// Grid dims defining the coordinate normalization.
    fn domain(&self) -> [usize; 3];

    fn velocity(&self, p: Vec3, t: f64, scratch: &mut Self::Scratch) -> Vec3;
}

impl VelocitySource for VelocityFieldModel {
    type Scratch = MlpCache;

    fn scratch(&self) -> MlpCache {
        self.new_cache()
    }

    fn domain(&self) -> [usize; 3] {
        VelocityFieldModel::domain(self)
    }

    #[inline]
    fn velocity(&self, p: Vec3, t: f64, scratch: &mut MlpCache) -> Vec3 {
        self.velocity_with(p, t, scratch)
    }
}

/// Explicit Euler flow of `source` over every voxel of `grid`:
/// `φ₀(x) = x`, `φ_{k+1} = φ_k + v(φ_k, k/K) / K`, returning `Φ = φ_K`.
pub fn integrate_with<V: VelocitySource>(
    source: &V,
    grid: &GridSpec,
    steps: usize,
) -> Result<DeformationField> {
    if steps == 0 {
        bail!(Argument, "integration needs at least one step");
    }
    if source.domain() != grid.dims() {
        bail!(
            Argument,
            "velocity domain {:?} does not match grid dims {:?}",
            source.domain(),
            grid.dims()
        );
    }
    let dt = 1.0 / steps as f64;
    let mut scratch = source.scratch();
    let map: Vec<Vec3> = (0..grid.len())
        .map(|i| {
            let mut p = grid.coords(i).map(|c| c as f64);
            for k in 0..steps {
                let t = k as f64 / steps as f64;
                let v = source.velocity(p, t, &mut scratch);
                for a in 0..3 {
                    p[a] += v[a] * dt;
                }
            }
            p
        })
        .collect();
    DeformationField::from_map(grid.clone(), map)
}

/// Integrates a single velocity model into its sampling map.
pub fn integrate(
    model: &VelocityFieldModel,
    grid: &GridSpec,
    steps: usize,
) -> Result<DeformationField> {
    integrate_with(model, grid, steps)
}
