use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail, Result};
use crate::rng;

/// Random Fourier feature map `c -> [cos(2πBc), sin(2πBc)]` for 4D
/// spacetime coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierEncoding {
    freqs: Vec<[f64; 4]>,
    scale: f64,
}

impl FourierEncoding {
    /// Samples an `l × 4` frequency matrix with entries drawn from
    /// `N(0, scale²)`. Entries are rounded to `f32` precision so the matrix
    /// serializes losslessly.
    pub fn sample(l: usize, scale: f64, seed: u64) -> Result<Self> {
        if l == 0 {
            bail!(Argument, "mapping dimension must be positive");
        }
        if !(scale > 0.0 && scale.is_finite()) {
            bail!(Argument, "frequency scale must be positive, got {scale}");
        }
        let mut r = rng::stream(seed, 0x0F0F);
        let freqs = (0..l)
            .map(|_| {
                core::array::from_fn(|_| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    (z * scale) as f32 as f64
                })
            })
            .collect();
        Ok(Self { freqs, scale })
    }

    pub fn from_matrix(freqs: Vec<[f64; 4]>, scale: f64) -> Result<Self> {
        if freqs.is_empty() {
            bail!(Argument, "mapping dimension must be positive");
        }
        if freqs.iter().flatten().any(|v| !v.is_finite()) {
            bail!(ModelState, "frequency matrix has non-finite entries");
        }
        Ok(Self { freqs, scale })
    }

    /// Mapping dimension `L`.
    pub fn mapping_dim(&self) -> usize {
        self.freqs.len()
    }

    /// Output length, `2L`.
    pub fn output_dim(&self) -> usize {
        2 * self.freqs.len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn freqs(&self) -> &[[f64; 4]] {
        &self.freqs
    }

    /// Writes the encoding of `c` into `out` (`out.len() == 2L`).
    pub fn encode_into(&self, c: [f64; 4], out: &mut [f64]) {
        let l = self.freqs.len();
        debug_assert_eq!(out.len(), 2 * l);
        let (cos_part, sin_part) = out.split_at_mut(l);
        for ((b, co), si) in self.freqs.iter().zip(cos_part).zip(sin_part) {
            let phase = 2.0 * PI * (b[0] * c[0] + b[1] * c[1] + b[2] * c[2] + b[3] * c[3]);
            let (s, co_v) = libm::sincos(phase);
            *co = co_v;
            *si = s;
        }
    }

    pub fn encode(&self, c: [f64; 4]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.output_dim()];
        self.encode_into(c, &mut out);
        out
    }

    /// Back-propagates `grad` (gradient w.r.t. the encoding output) to the
    /// three spatial coordinates, given the already computed `encoded` values.
    pub fn backward_spatial(&self, encoded: &[f64], grad: &[f64]) -> [f64; 3] {
        let l = self.freqs.len();
        let mut out = [0.0; 3];
        for (i, b) in self.freqs.iter().enumerate() {
            // d cos(φ) = -sin(φ) dφ, d sin(φ) = cos(φ) dφ, dφ/dc = 2πB.
            let g = -encoded[l + i] * grad[i] + encoded[i] * grad[l + i];
            for k in 0..3 {
                out[k] += g * b[k];
            }
        }
        out.map(|v| v * 2.0 * PI)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_encodes_to_ones_then_zeros() {
        let e = FourierEncoding::sample(128, 3.0, 7).unwrap();
        let out = e.encode([0.0; 4]);
        assert_eq!(out.len(), 256);
        assert!(out[..128].iter().all(|v| *v == 1.0));
        assert!(out[128..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn half_frequency_at_unit_coordinate() {
        let e = FourierEncoding::from_matrix(alloc::vec![[0.5, 0.0, 0.0, 0.0]], 1.0).unwrap();
        let out = e.encode([1.0, 0.0, 0.0, 0.0]);
        assert!((out[0] + 1.0).abs() < 1e-6);
        assert!(out[1].abs() < 1e-6);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let a = FourierEncoding::sample(16, 3.0, 42).unwrap();
        let b = FourierEncoding::sample(16, 3.0, 42).unwrap();
        let c = FourierEncoding::sample(16, 3.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn spatial_backward_matches_finite_differences() {
        let e = FourierEncoding::sample(6, 1.5, 3).unwrap();
        let c = [0.2, -0.4, 0.7, 0.3];
        let grad: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let enc = e.encode(c);
        let analytic = e.backward_spatial(&enc, &grad);
        let h = 1e-6;
        for k in 0..3 {
            let mut cp = c;
            let mut cm = c;
            cp[k] += h;
            cm[k] -= h;
            let fp: f64 = e.encode(cp).iter().zip(&grad).map(|(a, b)| a * b).sum();
            let fm: f64 = e.encode(cm).iter().zip(&grad).map(|(a, b)| a * b).sum();
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - analytic[k]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }
}
