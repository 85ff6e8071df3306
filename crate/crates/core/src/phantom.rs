//! Analytic brain-like phantoms for demos and tests.
//!
//! A phantom is a smooth function of world position: an ellipsoidal head
//! with a soft border, a few seeded tissue blobs, and optionally a textured
//! spherical lesion.

use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::Vec3;
use crate::rng;
use crate::volume::{GridSpec, LabelMask, Volume};

#[derive(Debug, Clone, PartialEq)]
struct Blob {
    center: Vec3,
    sigma: f64,
    amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrainPhantom {
    center: Vec3,
    radii: Vec3,
    blobs: Vec<Blob>,
    tumor: Option<(Vec3, f64)>,
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    libm::sqrt((0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum())
}

impl BrainPhantom {
    /// Phantom sized for an `n`³ unit grid.
    pub fn new(n: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, 0x9A);
        let nf = n as f64;
        let c = (nf - 1.0) / 2.0;
        let center = [c; 3];
        let radii = [0.40, 0.35, 0.32].map(|f| f * nf * r.random_range(0.95..1.05));
        let blobs = (0..4)
            .map(|i| {
                let off: Vec3 = core::array::from_fn(|k| r.random_range(-0.5..0.5) * radii[k]);
                Blob {
                    center: core::array::from_fn(|k| center[k] + off[k]),
                    sigma: r.random_range(0.10..0.16) * nf,
                    amplitude: if i == 3 {
                        -35.0
                    } else {
                        r.random_range(25.0..55.0)
                    },
                }
            })
            .collect();
        Self {
            center,
            radii,
            blobs,
            tumor: None,
        }
    }

    /// Adds a spherical lesion of radius `fraction·n` at a seeded position
    /// well inside the brain.
    pub fn with_tumor(mut self, n: usize, fraction: f64, seed: u64) -> Self {
        let mut r = rng::stream(seed, 0x7B);
        let off: Vec3 = core::array::from_fn(|k| r.random_range(-0.2..0.2) * self.radii[k]);
        let c = core::array::from_fn(|k| self.center[k] + off[k]);
        self.tumor = Some((c, (fraction * n as f64).max(1.0)));
        self
    }

    fn rho(&self, p: Vec3) -> f64 {
        libm::sqrt(
            (0..3)
                .map(|k| {
                    let d = (p[k] - self.center[k]) / self.radii[k];
                    d * d
                })
                .sum(),
        )
    }

    pub fn in_brain(&self, p: Vec3) -> bool {
        self.rho(p) <= 1.0
    }

    pub fn in_tumor(&self, p: Vec3) -> bool {
        self.tumor.is_some_and(|(c, rad)| dist(p, c) <= rad)
    }

    pub fn intensity(&self, p: Vec3) -> f64 {
        let mean_r = (self.radii[0] + self.radii[1] + self.radii[2]) / 3.0;
        let head = 0.5 * (1.0 - libm::tanh((self.rho(p) - 1.0) * mean_r / 1.5));
        let tissue: f64 = self
            .blobs
            .iter()
            .map(|b| {
                let d = dist(p, b.center);
                b.amplitude * libm::exp(-d * d / (2.0 * b.sigma * b.sigma))
            })
            .sum();
        let healthy = head * (100.0 + tissue);
        match self.tumor {
            Some((c, rad)) => {
                let t = 0.5 * (1.0 - libm::tanh((dist(p, c) - rad) / 0.75));
                let texture = 160.0
                    + 25.0 * libm::sin(0.9 * p[0]) * libm::sin(0.7 * p[1]) * libm::sin(0.8 * p[2]);
                (1.0 - t) * healthy + t * texture
            }
            None => healthy,
        }
    }

    /// Image on `grid`, evaluated at each voxel's world position plus `shift`.
    pub fn render(&self, grid: &GridSpec, shift: Vec3) -> Volume {
        Volume::from_fn(grid.clone(), |x, y, z| {
            let w = grid.voxel_to_world([x as f64, y as f64, z as f64]);
            self.intensity([w[0] + shift[0], w[1] + shift[1], w[2] + shift[2]]) as f32
        })
        .expect("phantom intensities are finite")
    }

    fn mask(&self, grid: &GridSpec, f: impl Fn(&Self, Vec3) -> bool) -> LabelMask {
        LabelMask::from_predicate(grid.clone(), |x, y, z| {
            f(self, grid.voxel_to_world([x as f64, y as f64, z as f64]))
        })
    }

    pub fn brain_mask(&self, grid: &GridSpec) -> LabelMask {
        self.mask(grid, Self::in_brain)
    }

    pub fn tumor_mask(&self, grid: &GridSpec) -> LabelMask {
        self.mask(grid, Self::in_tumor)
    }
}
