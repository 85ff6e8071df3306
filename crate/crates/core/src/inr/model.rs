use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FourierEncoding, Mlp, MlpCache};
use crate::error::{bail, Result};
use crate::linalg::Vec3;
use crate::rng;

/// Scale applied to the initial output-layer weights.
const OUTPUT_INIT_SCALE: f64 = 1e-4;

/// Network architecture of a velocity model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelArch {
    /// Fourier mapping dimension `L` (encoding width is `2L`).
    pub mapping_dim: usize,
    /// Standard deviation of the frequency matrix entries.
    pub freq_scale: f64,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
}

impl Default for ModelArch {
    fn default() -> Self {
        Self {
            mapping_dim: 128,
            freq_scale: 3.0,
            hidden: alloc::vec![128, 128, 128],
        }
    }
}

impl ModelArch {
    pub fn validate(&self) -> Result<()> {
        if self.mapping_dim == 0 {
            bail!(Argument, "mapping dimension must be positive");
        }
        if !(self.freq_scale > 0.0 && self.freq_scale.is_finite()) {
            bail!(Argument, "frequency scale must be positive");
        }
        if self.hidden.contains(&0) {
            bail!(Argument, "hidden layer widths must be positive");
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(2 * self.mapping_dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(3);
        sizes
    }
}

/// A backward velocity field `v(x, t)` represented by a coordinate network.
///
/// Spatial inputs are voxel coordinates of the `domain` grid; they are mapped
/// to `[-1, 1]` per axis (and `t` kept in `[0, 1]`) before encoding. The
/// output is a velocity in voxels per unit time.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFieldModel {
    encoding: FourierEncoding,
    mlp: Mlp,
    domain: [usize; 3],
}

impl VelocityFieldModel {
    /// Randomly initialized model: Gaussian weights scaled by `1/sqrt(fan_in)`,
    /// zero biases, output weights shrunk so the flow starts near identity.
    pub fn new(arch: &ModelArch, domain: [usize; 3], seed: u64) -> Result<Self> {
        arch.validate()?;
        let encoding = FourierEncoding::sample(arch.mapping_dim, arch.freq_scale, seed)?;
        let sizes = arch.layer_sizes();
        let mut mlp = Mlp::zeros(&sizes)?;
        let mut r = rng::stream(seed, 0xA11CE);
        let layers = mlp.num_layers();
        for (i, &fan) in sizes[..layers].iter().enumerate() {
            let fan_in = fan as f64;
            let scale = if i + 1 == layers {
                OUTPUT_INIT_SCALE / libm::sqrt(fan_in)
            } else {
                1.0 / libm::sqrt(fan_in)
            };
            let (w, _) = mlp.layer_mut(i);
            for v in w.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut r);
                *v = (z * scale) as f32 as f64;
            }
        }
        Self::from_parts(encoding, mlp, domain)
    }

    /// Model whose network parameters are all zero: the velocity is zero
    /// everywhere.
    pub fn zeros(arch: &ModelArch, domain: [usize; 3], seed: u64) -> Result<Self> {
        arch.validate()?;
        let encoding = FourierEncoding::sample(arch.mapping_dim, arch.freq_scale, seed)?;
        let mlp = Mlp::zeros(&arch.layer_sizes())?;
        Self::from_parts(encoding, mlp, domain)
    }

    /// Spatially and temporally constant velocity, carried by the output bias.
    pub fn constant(arch: &ModelArch, domain: [usize; 3], velocity: Vec3) -> Result<Self> {
        let mut m = Self::zeros(arch, domain, 0)?;
        let last = m.mlp.num_layers() - 1;
        m.mlp.layer_mut(last).1.copy_from_slice(&velocity);
        if velocity.iter().any(|v| !v.is_finite()) {
            bail!(ModelState, "constant velocity must be finite");
        }
        Ok(m)
    }

    pub fn from_parts(encoding: FourierEncoding, mlp: Mlp, domain: [usize; 3]) -> Result<Self> {
        if domain.contains(&0) {
            bail!(
                ModelState,
                "model domain dims must be positive, got {domain:?}"
            );
        }
        let sizes = mlp.sizes();
        if sizes[0] != encoding.output_dim() {
            bail!(
                ModelState,
                "network input width {} does not match encoding width {}",
                sizes[0],
                encoding.output_dim()
            );
        }
        if *sizes.last().expect("nonempty") != 3 {
            bail!(ModelState, "network must output a 3-vector");
        }
        if mlp.params().iter().any(|p| !p.is_finite()) {
            bail!(ModelState, "network parameters are not finite");
        }
        Ok(Self {
            encoding,
            mlp,
            domain,
        })
    }

    pub fn encoding(&self) -> &FourierEncoding {
        &self.encoding
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub(crate) fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    /// Grid dims defining the coordinate normalization.
    pub fn domain(&self) -> [usize; 3] {
        self.domain
    }

    pub fn arch(&self) -> ModelArch {
        let sizes = self.mlp.sizes();
        ModelArch {
            mapping_dim: self.encoding.mapping_dim(),
            freq_scale: self.encoding.scale(),
            hidden: sizes[1..sizes.len() - 1].to_vec(),
        }
    }

    /// d(normalized coordinate)/d(voxel coordinate) per axis.
    pub fn voxel_to_normalized_scale(&self) -> Vec3 {
        self.domain
            .map(|n| if n > 1 { 2.0 / (n as f64 - 1.0) } else { 0.0 })
    }

    /// Maps a voxel coordinate and time to the network's spacetime input.
    #[inline]
    pub fn normalize(&self, p: Vec3, t: f64) -> [f64; 4] {
        let s = self.voxel_to_normalized_scale();
        let axis = |k: usize| if s[k] == 0.0 { 0.0 } else { p[k] * s[k] - 1.0 };
        [axis(0), axis(1), axis(2), t]
    }

    /// Velocity at a normalized spacetime coordinate, reusing `cache`.
    #[inline]
    pub fn velocity_normalized(&self, c: [f64; 4], cache: &mut MlpCache) -> Vec3 {
        self.encoding.encode_into(c, cache.input_mut());
        self.mlp.forward(cache);
        let o = cache.output();
        [o[0], o[1], o[2]]
    }

    /// Velocity at voxel coordinate `p` and time `t`, reusing `cache`.
    #[inline]
    pub fn velocity_with(&self, p: Vec3, t: f64, cache: &mut MlpCache) -> Vec3 {
        self.velocity_normalized(self.normalize(p, t), cache)
    }

    /// Velocity at voxel coordinate `p` and time `t`.
    pub fn query_velocity(&self, p: Vec3, t: f64) -> Vec3 {
        let mut cache = MlpCache::new(&self.mlp);
        self.velocity_with(p, t, &mut cache)
    }

    pub fn new_cache(&self) -> MlpCache {
        MlpCache::new(&self.mlp)
    }

    /// Rounds all network parameters to `f32` precision.
    pub(crate) fn quantize_to_f32(&mut self) {
        for p in self.mlp.params_mut() {
            *p = *p as f32 as f64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelArch {
        ModelArch {
            mapping_dim: 4,
            freq_scale: 1.0,
            hidden: alloc::vec![8],
        }
    }

    #[test]
    fn zero_model_has_zero_velocity() {
        let m = VelocityFieldModel::zeros(&ModelArch::default(), [16, 16, 16], 1).unwrap();
        assert_eq!(m.query_velocity([3.2, -1.0, 40.0], 0.7), [0.0; 3]);
    }

    #[test]
    fn constant_model_ignores_position() {
        let m = VelocityFieldModel::constant(&tiny(), [8, 8, 8], [1.0, -2.0, 0.5]).unwrap();
        assert_eq!(m.query_velocity([1.0, 2.0, 3.0], 0.2), [1.0, -2.0, 0.5]);
        assert_eq!(m.query_velocity([7.0, 0.0, 3.5], 0.9), [1.0, -2.0, 0.5]);
    }

    #[test]
    fn normalization_maps_corners() {
        let m = VelocityFieldModel::zeros(&tiny(), [9, 5, 1], 0).unwrap();
        assert_eq!(m.normalize([0.0, 0.0, 0.0], 0.25), [-1.0, -1.0, 0.0, 0.25]);
        assert_eq!(m.normalize([8.0, 4.0, 0.0], 1.0), [1.0, 1.0, 0.0, 1.0]);
        assert_eq!(m.normalize([4.0, 2.0, 0.0], 0.0), [0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn init_is_near_identity_and_seeded() {
        let a = VelocityFieldModel::new(&ModelArch::default(), [32; 3], 5).unwrap();
        let b = VelocityFieldModel::new(&ModelArch::default(), [32; 3], 5).unwrap();
        assert_eq!(a, b);
        let v = a.query_velocity([10.0, 20.0, 5.0], 0.5);
        assert!(v.iter().all(|c| c.abs() < 1e-2), "{v:?}");
        assert_eq!(a.arch(), ModelArch::default());
    }

    #[test]
    fn mismatched_parts_rejected() {
        let enc = FourierEncoding::sample(4, 1.0, 0).unwrap();
        let mlp = Mlp::zeros(&[6, 3]).unwrap();
        assert!(VelocityFieldModel::from_parts(enc.clone(), mlp, [4, 4, 4]).is_err());
        let mlp = Mlp::zeros(&[8, 2]).unwrap();
        assert!(VelocityFieldModel::from_parts(enc, mlp, [4, 4, 4]).is_err());
    }
}
