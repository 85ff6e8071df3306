use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{PoolManifest, SampleEntry, SampleKind};
use crate::error::{bail, Result};

/// Real entries in a batch of `batch_size`: `round(B · r_real)`, ties up.
pub fn real_quota(batch_size: usize, r_real: f64) -> usize {
    (libm::floor(batch_size as f64 * r_real + 0.5) as usize).min(batch_size)
}

/// Stratified sampler: a fixed real quota per batch, the rest drawn
/// uniformly from all synthetic entries, with replacement.
#[derive(Debug, Clone)]
pub struct BatchSampler<'a> {
    manifest: &'a PoolManifest,
    real: Vec<usize>,
    synthetic: Vec<usize>,
    batch_size: usize,
    quota: usize,
}

impl<'a> BatchSampler<'a> {
    pub fn new(manifest: &'a PoolManifest, batch_size: usize, r_real: f64) -> Result<Self> {
        if batch_size == 0 {
            bail!(Argument, "batch size must be at least 1");
        }
        if !(r_real > 0.0 && r_real <= 1.0) {
            bail!(Argument, "r_real must lie in (0, 1], got {r_real}");
        }
        let (mut real, mut synthetic) = (Vec::new(), Vec::new());
        for (i, e) in manifest.entries().iter().enumerate() {
            if e.kind == SampleKind::Real {
                real.push(i);
            } else {
                synthetic.push(i);
            }
        }
        let quota = real_quota(batch_size, r_real);
        if quota > 0 && real.is_empty() {
            bail!(
                Argument,
                "batch needs {quota} real entries but the pool has none"
            );
        }
        if quota < batch_size && synthetic.is_empty() {
            bail!(
                Argument,
                "batch needs synthetic entries but the pool has none"
            );
        }
        Ok(Self {
            manifest,
            real,
            synthetic,
            batch_size,
            quota,
        })
    }

    pub fn real_quota(&self) -> usize {
        self.quota
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<&'a SampleEntry> {
        let entries = self.manifest.entries();
        let mut out: Vec<&SampleEntry> = Vec::with_capacity(self.batch_size);
        for _ in 0..self.quota {
            out.push(&entries[self.real[rng.random_range(0..self.real.len())]]);
        }
        for _ in self.quota..self.batch_size {
            out.push(&entries[self.synthetic[rng.random_range(0..self.synthetic.len())]]);
        }
        out.shuffle(rng);
        out
    }
}

/// One batch at the manifest's own `r_real`.
pub fn sample_batch<'a, R: Rng + ?Sized>(
    manifest: &'a PoolManifest,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<&'a SampleEntry>> {
    Ok(BatchSampler::new(manifest, batch_size, manifest.r_real())?.sample(rng))
}
