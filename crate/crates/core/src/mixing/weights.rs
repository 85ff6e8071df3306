use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::rng;

/// Convex weights `(w1, w2)` with `w2 = 1 - w1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct MixWeights {
    w1: f64,
    w2: f64,
}

impl MixWeights {
    pub fn new(w1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w1) {
            bail!(Argument, "mixing weight must lie in [0, 1], got {w1}");
        }
        Ok(Self { w1, w2: 1.0 - w1 })
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn w2(&self) -> f64 {
        self.w2
    }

    /// `(w2, w1)`.
    pub fn swapped(&self) -> Self {
        Self {
            w1: self.w2,
            w2: self.w1,
        }
    }
}

impl TryFrom<[f64; 2]> for MixWeights {
    type Error = crate::Error;
    fn try_from(w: [f64; 2]) -> Result<Self> {
        let m = Self::new(w[0])?;
        if (m.w2 - w[1]).abs() > 1e-12 {
            bail!(Argument, "mixing weights {w:?} do not sum to 1");
        }
        Ok(m)
    }
}

impl From<MixWeights> for [f64; 2] {
    fn from(m: MixWeights) -> Self {
        [m.w1, m.w2]
    }
}

/// Seeded `Beta(a, b)` source of mixing weights (default `Beta(2, 2)`).
///
/// Draw `i` depends only on `(seed, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSampler {
    pub a: f64,
    pub b: f64,
    pub seed: u64,
    /// Index of the next sequential draw.
    pub next: u64,
}

impl BetaSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            a: 2.0,
            b: 2.0,
            seed,
            next: 0,
        }
    }

    pub fn with_shape(a: f64, b: f64, seed: u64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            bail!(Argument, "Beta shape parameters must be positive");
        }
        Ok(Self {
            a,
            b,
            seed,
            next: 0,
        })
    }

    /// Weights for draw `index`.
    pub fn draw(&self, index: u64) -> MixWeights {
        let dist = Beta::new(self.a, self.b).expect("validated shape");
        let mut r = rng::stream(self.seed, index);
        let w1: f64 = dist.sample(&mut r);
        MixWeights::new(w1.clamp(0.0, 1.0)).expect("clamped")
    }
}

/// Next sequential draw from `sampler`.
pub fn sample_mix_weights(sampler: &mut BetaSampler) -> MixWeights {
    let w = sampler.draw(sampler.next);
    sampler.next += 1;
    w
}
