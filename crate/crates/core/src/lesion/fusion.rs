use alloc::vec;
use alloc::vec::Vec;

use super::SignedDistanceField;
use crate::error::{bail, Result};
use crate::volume::{GridSpec, Volume};

/// Per-voxel blend weights `α = clamp(sdf / τ, 0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMap {
    grid: GridSpec,
    tau: f64,
    weights: Vec<f64>,
}

impl AlphaMap {
    /// Wraps explicit weights, each of which must lie in `[0, 1]`.
    pub fn from_weights(grid: GridSpec, tau: f64, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            bail!(
                Argument,
                "alpha has {} weights for {} voxels",
                weights.len(),
                grid.len()
            );
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            bail!(Data, "alpha weights must lie in [0, 1]");
        }
        Ok(Self { grid, tau, weights })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

pub fn alpha_map(sdf: &SignedDistanceField, tau: f64) -> Result<AlphaMap> {
    if !(tau > 0.0 && tau.is_finite()) {
        bail!(Argument, "bandwidth must be positive, got {tau}");
    }
    let weights = sdf
        .values()
        .iter()
        .map(|s| (s / tau).clamp(0.0, 1.0))
        .collect();
    Ok(AlphaMap {
        grid: sdf.grid().clone(),
        tau,
        weights,
    })
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3σ)`.
fn kernel(sigma: f64) -> Vec<f64> {
    let r = libm::ceil(3.0 * sigma) as i64;
    (-r..=r)
        .map(|k| libm::exp(-((k * k) as f64) / (2.0 * sigma * sigma)))
        .collect()
}

/// Separable Gaussian blur; taps falling outside the grid are dropped and
/// the rest renormalized.
pub(crate) fn gaussian_blur(dims: [usize; 3], data: &[f64], sigma: f64) -> Vec<f64> {
    let k = kernel(sigma);
    let r = (k.len() / 2) as i64;
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut cur = data.to_vec();
    let mut next = vec![0.0; cur.len()];
    for axis in 0..3 {
        let n = dims[axis] as i64;
        let stride = strides[axis];
        for (i, out) in next.iter_mut().enumerate() {
            let pos = ((i / stride) % dims[axis]) as i64;
            let base = i - pos as usize * stride;
            let (mut acc, mut norm) = (0.0, 0.0);
            for (t, w) in k.iter().enumerate() {
                let q = pos + t as i64 - r;
                if (0..n).contains(&q) {
                    acc += w * cur[base + q as usize * stride];
                    norm += w;
                }
            }
            *out = acc / norm;
        }
        core::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Replaces `background` by its Gaussian blur on the band `0 < |sdf| < τ`;
/// voxels off the band keep their exact values.
pub fn pve_blur(
    background: &Volume,
    sdf: &SignedDistanceField,
    tau: f64,
    sigma: f64,
) -> Result<Volume> {
    if background.dims() != sdf.grid().dims() {
        bail!(Argument, "background and distance field dims differ");
    }
    if !(sigma > 0.0 && sigma.is_finite() && tau > 0.0) {
        bail!(Argument, "blur needs positive σ and τ");
    }
    let band: Vec<bool> = sdf
        .values()
        .iter()
        .map(|s| s.abs() > 0.0 && s.abs() < tau)
        .collect();
    if !band.contains(&true) {
        return Ok(background.clone());
    }
    let src: Vec<f64> = background.data().iter().map(|&v| f64::from(v)).collect();
    let blurred = gaussian_blur(background.dims(), &src, sigma);
    let data = background
        .data()
        .iter()
        .zip(&blurred)
        .zip(&band)
        .map(|((&v, &b), &inside)| if inside { b as f32 } else { v })
        .collect();
    Volume::new(background.grid().clone(), data)
}

/// `α·lesion + (1 − α)·background`, voxelwise.
pub fn fuse(lesion: &Volume, background: &Volume, alpha: &AlphaMap) -> Result<Volume> {
    if lesion.dims() != background.dims() || lesion.dims() != alpha.grid().dims() {
        bail!(Argument, "fusion inputs differ in dims");
    }
    let data = lesion
        .data()
        .iter()
        .zip(background.data())
        .zip(alpha.weights())
        .map(|((&l, &b), &a)| {
            let (l, b) = (f64::from(l), f64::from(b));
            (b + a * (l - b)) as f32
        })
        .collect();
    Volume::new(background.grid().clone(), data)
}
