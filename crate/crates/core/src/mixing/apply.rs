use crate::error::{bail, Result};
use crate::inr::{integrate_with, DeformationField, MlpCache, VelocityFieldModel, VelocitySource};
use crate::linalg::Vec3;
use crate::volume::{sample_nearest, sample_trilinear, GridSpec, LabelMask, Volume};

use super::MixWeights;

/// `w1 v1 + w2 v2`, evaluated at a common spacetime point.
///
/// A zero weight drops its model entirely, so `w = (1, 0)` reproduces `v1`
/// bit for bit.
#[derive(Debug, Clone, Copy)]
pub struct Mixture<'a> {
    first: &'a VelocityFieldModel,
    second: &'a VelocityFieldModel,
    weights: MixWeights,
}

impl<'a> Mixture<'a> {
    pub fn new(
        first: &'a VelocityFieldModel,
        second: &'a VelocityFieldModel,
        weights: MixWeights,
    ) -> Result<Self> {
        if first.domain() != second.domain() {
            bail!(
                Argument,
                "models use different coordinate domains {:?} and {:?}",
                first.domain(),
                second.domain()
            );
        }
        Ok(Self {
            first,
            second,
            weights,
        })
    }
}

impl VelocitySource for Mixture<'_> {
    type Scratch = (MlpCache, MlpCache);

    fn scratch(&self) -> Self::Scratch {
        (self.first.new_cache(), self.second.new_cache())
    }

    fn domain(&self) -> [usize; 3] {
        self.first.domain()
    }

    #[inline]
    fn velocity(&self, p: Vec3, t: f64, scratch: &mut Self::Scratch) -> Vec3 {
        let (w1, w2) = (self.weights.w1(), self.weights.w2());
        if w2 == 0.0 {
            return self
                .first
                .velocity_with(p, t, &mut scratch.0)
                .map(|v| w1 * v);
        }
        if w1 == 0.0 {
            return self
                .second
                .velocity_with(p, t, &mut scratch.1)
                .map(|v| w2 * v);
        }
        let a = self.first.velocity_with(p, t, &mut scratch.0);
        let b = self.second.velocity_with(p, t, &mut scratch.1);
        [
            w1 * a[0] + w2 * b[0],
            w1 * a[1] + w2 * b[1],
            w1 * a[2] + w2 * b[2],
        ]
    }
}

/// Mixed velocity `w1 v1(p, t) + w2 v2(p, t)`.
pub fn mix_velocity(
    first: &VelocityFieldModel,
    second: &VelocityFieldModel,
    weights: MixWeights,
    p: Vec3,
    t: f64,
) -> Result<Vec3> {
    let mix = Mixture::new(first, second, weights)?;
    let mut scratch = mix.scratch();
    Ok(mix.velocity(p, t, &mut scratch))
}

/// Euler-integrates the mixed velocity into a sampling map on `grid`.
pub fn integrate_mixed(
    first: &VelocityFieldModel,
    second: &VelocityFieldModel,
    weights: MixWeights,
    grid: &GridSpec,
    steps: usize,
) -> Result<DeformationField> {
    integrate_with(&Mixture::new(first, second, weights)?, grid, steps)
}

/// Warps a source image (trilinear) and label (nearest) through `field`.
/// Outputs take the field's grid; samples outside the source are 0.
pub fn apply_deformation(
    image: &Volume,
    mask: &LabelMask,
    field: &DeformationField,
) -> Result<(Volume, LabelMask)> {
    if image.dims() != mask.dims() {
        bail!(Argument, "image and mask dims differ");
    }
    let img = field
        .map()
        .iter()
        .map(|p| sample_trilinear(image, *p) as f32)
        .collect();
    let lab = field
        .map()
        .iter()
        .map(|p| sample_nearest(mask, *p))
        .collect();
    Ok((
        Volume::new(field.grid().clone(), img)?,
        LabelMask::new(field.grid().clone(), lab)?,
    ))
}
