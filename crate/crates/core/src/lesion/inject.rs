use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::register::RigidRegistration;
use super::sdf::squared_edt;
use super::{
    alpha_map, apply_rigid, apply_rigid_mask, fuse, match_histogram, pve_blur, register_rigid,
    signed_distance, RigidTransform,
};
use crate::error::{bail, Error, Result};
use crate::linalg::{linear_part, mat3_vec};
use crate::rng;
use crate::volume::{estimate_brain_mask, LabelMask, Volume};

/// Parameters of lesion injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionConfig {
    /// Alpha transition bandwidth, voxels.
    pub tau: f64,
    /// Boundary blur standard deviation, voxels.
    pub sigma: f64,
    pub hist_bins: usize,
    pub mi_bins: usize,
    /// Per-axis placement jitter bound, voxels.
    pub max_translation: f64,
    /// Per-axis rotation jitter bound, degrees.
    pub max_rotation_deg: f64,
    /// Minimum depth of the placed lesion inside the healthy brain, voxels.
    pub margin: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            tau: 4.0,
            sigma: 1.0,
            hist_bins: 256,
            mi_bins: 32,
            max_translation: 10.0,
            max_rotation_deg: 20.0,
            margin: 2.0,
            max_attempts: 50,
            seed: 0,
        }
    }
}

impl InjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            bail!(Argument, "tau must be positive, got {}", self.tau);
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            bail!(Argument, "sigma must be positive, got {}", self.sigma);
        }
        if self.hist_bins < 8 || self.mi_bins < 8 {
            bail!(Argument, "histogram and MI bins must be at least 8");
        }
        if !(self.max_translation >= 0.0 && self.max_translation.is_finite())
            || !(self.max_rotation_deg >= 0.0 && self.max_rotation_deg <= 180.0)
        {
            bail!(Argument, "jitter bounds must be finite and non-negative");
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            bail!(Argument, "margin must be non-negative, got {}", self.margin);
        }
        if self.max_attempts == 0 {
            bail!(Argument, "max_attempts must be at least 1");
        }
        Ok(())
    }
}

/// A synthetic lesion image with its label and the transforms that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub image: Volume,
    pub mask: LabelMask,
    /// Aligned, intensity-matched healthy scan before fusion.
    pub background: Volume,
    /// Healthy-to-lesion-space alignment.
    pub registration: RigidRegistration,
    /// Placement perturbation applied to the lesion, in world space.
    pub jitter: RigidTransform,
    /// Placement attempts used, counting the accepted one.
    pub attempts: usize,
}

/// Distance from each voxel to the nearest voxel that is outside `brain`,
/// counting the lattice beyond the grid as outside.
fn brain_depth(brain: &LabelMask) -> Vec<f64> {
    let dims = brain.dims();
    let m = brain.data();
    let d2 = squared_edt(dims, |i| m[i] == 0);
    let g = brain.grid();
    d2.iter()
        .enumerate()
        .map(|(i, &d)| {
            let c = g.coords(i);
            let edge = (0..3)
                .map(|k| (c[k] + 1).min(dims[k] - c[k]))
                .min()
                .expect("three axes") as f64;
            libm::sqrt(d).min(edge)
        })
        .collect()
}

fn draw_jitter(lesion: &LabelMask, cfg: &InjectionConfig, attempt: u64) -> RigidTransform {
    let mut r = rng::stream(cfg.seed, attempt);
    let t = cfg.max_translation;
    let a = cfg.max_rotation_deg.to_radians();
    let mut sym = |b: f64| if b > 0.0 { r.random_range(-b..=b) } else { 0.0 };
    let tv = [sym(t), sym(t), sym(t)];
    let angles = [sym(a), sym(a), sym(a)];
    let g = lesion.grid();
    let center = g.voxel_to_world(lesion.centroid().expect("nonempty lesion"));
    let tw = mat3_vec(&linear_part(g.affine()), tv);
    RigidTransform::from_euler_zyx(angles, tw, center)
}

/// Seeded placement of `lesion` whose every voxel sits at depth ≥ margin
/// in `brain`. Returns the jitter and the attempt count.
fn place(
    lesion: &LabelMask,
    brain: &LabelMask,
    cfg: &InjectionConfig,
) -> Result<(RigidTransform, LabelMask, usize)> {
    let depth = brain_depth(brain);
    let bin = lesion.binarize();
    for attempt in 0..cfg.max_attempts {
        let j = draw_jitter(&bin, cfg, attempt as u64);
        let moved = apply_rigid_mask(lesion, &j, lesion.grid());
        let mut any = false;
        let ok = moved.data().iter().zip(&depth).all(|(&l, &d)| {
            any |= l != 0;
            l == 0 || d >= cfg.margin
        });
        if ok && any {
            return Ok((j, moved, attempt + 1));
        }
    }
    Err(Error::Placement {
        attempts: cfg.max_attempts,
    })
}

/// Transplants the lesion of `(lesion_image, lesion_mask)` into `healthy`.
///
/// The healthy scan is rigidly aligned to the lesion scan, its intensities
/// are matched to the lesion scan's healthy parenchyma, the lesion is placed
/// with a seeded rigid jitter inside the healthy brain, and the lesion
/// texture is alpha-blended in over a blurred boundary band. The output
/// lives on the lesion image's grid. `lesion_brain` defaults to
/// [`estimate_brain_mask`] of the lesion image.
pub fn inject_lesion(
    lesion_image: &Volume,
    lesion_mask: &LabelMask,
    lesion_brain: Option<&LabelMask>,
    healthy: &Volume,
    healthy_brain: &LabelMask,
    cfg: &InjectionConfig,
) -> Result<Injection> {
    cfg.validate()?;
    if lesion_image.dims() != lesion_mask.dims() {
        bail!(Argument, "lesion image and mask dims differ");
    }
    if healthy.dims() != healthy_brain.dims() {
        bail!(Argument, "healthy image and brain mask dims differ");
    }
    if lesion_mask.count_nonzero() == 0 {
        bail!(Degenerate, "lesion mask is empty");
    }
    let estimated;
    let lesion_brain = match lesion_brain {
        Some(b) => b,
        None => {
            estimated = estimate_brain_mask(lesion_image)?;
            &estimated
        }
    };
    let grid = lesion_image.grid();

    let registration = register_rigid(healthy, lesion_image, lesion_brain, cfg)?;
    let aligned = apply_rigid(healthy, &registration.transform, grid);
    let aligned_brain = apply_rigid_mask(&healthy_brain.binarize(), &registration.transform, grid);
    let parenchyma = lesion_brain.binarize().difference(lesion_mask)?;
    let background = match_histogram(
        &aligned,
        lesion_image,
        &aligned_brain,
        &parenchyma,
        cfg.hist_bins,
    )?;

    let (jitter, mask, attempts) = place(lesion_mask, &aligned_brain, cfg)?;
    let texture = apply_rigid(lesion_image, &jitter, grid);
    let sdf = signed_distance(&mask.binarize())?;
    let alpha = alpha_map(&sdf, cfg.tau)?;
    let blurred = pve_blur(&background, &sdf, cfg.tau, cfg.sigma)?;
    let image = fuse(&texture, &blurred, &alpha)?;
    Ok(Injection {
        image,
        mask,
        background,
        registration,
        jitter,
        attempts,
    })
}
