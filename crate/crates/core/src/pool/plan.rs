use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::mixing::{BetaSampler, MixWeights};
use crate::rng::{child_seed, stream};

const TARGET_STREAM: u64 = 0x5041;
const LESION_STREAM: u64 = 0x5345;
const JITTER_SEED: u64 = 0x4A49;

/// One spatial variant: warp `source` by the `weights` mix of its fields
/// towards `targets`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialJob {
    pub id: String,
    pub source: usize,
    pub targets: [usize; 2],
    pub weights: MixWeights,
    pub seed: u64,
}

/// One semantic variant: transplant the lesion of case `lesion` into the
/// healthy scan `healthy` with placement seed `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticJob {
    pub id: String,
    pub healthy: usize,
    pub lesion: usize,
    pub seed: u64,
}

fn check_ids(ids: &[String], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id.is_empty() {
            bail!(Argument, "empty {what} case id");
        }
        if !seen.insert(id) {
            bail!(Argument, "duplicate {what} case id {id}");
        }
    }
    Ok(())
}

/// Plans `k` variants per tumour case, each pairing the source with two
/// distinct other cases and a Beta-drawn weight.
pub fn plan_spatial_pool(
    case_ids: &[String],
    k: usize,
    sampler: &BetaSampler,
) -> Result<Vec<SpatialJob>> {
    check_ids(case_ids, "tumor")?;
    let n = case_ids.len();
    if n < 3 {
        bail!(Argument, "spatial pool needs at least 3 cases, got {n}");
    }
    if k == 0 {
        bail!(Argument, "k_spatial must be at least 1");
    }
    let mut jobs = Vec::with_capacity(n * k);
    for (s, sid) in case_ids.iter().enumerate() {
        for v in 0..k {
            let index = (s * k + v) as u64;
            let mut r = stream(child_seed(sampler.seed, TARGET_STREAM), index);
            let skip = |x: usize, past: &[usize]| {
                let mut x = x;
                let mut sorted: Vec<usize> = past.to_vec();
                sorted.sort_unstable();
                for p in sorted {
                    if x >= p {
                        x += 1;
                    }
                }
                x
            };
            let t1 = skip(r.random_range(0..n - 1), &[s]);
            let t2 = skip(r.random_range(0..n - 2), &[s, t1]);
            jobs.push(SpatialJob {
                id: format!("spatial-{sid}-{v:03}"),
                source: s,
                targets: [t1, t2],
                weights: sampler.draw(index),
                seed: child_seed(sampler.seed, index),
            });
        }
    }
    Ok(jobs)
}

/// Plans `k` injections per healthy scan, each with a uniformly drawn
/// lesion case and its own placement seed.
pub fn plan_semantic_pool(
    tumor_ids: &[String],
    healthy_ids: &[String],
    k: usize,
    seed: u64,
) -> Result<Vec<SemanticJob>> {
    check_ids(tumor_ids, "tumor")?;
    check_ids(healthy_ids, "healthy")?;
    if tumor_ids.is_empty() || healthy_ids.is_empty() {
        bail!(Argument, "semantic pool needs tumor and healthy cases");
    }
    if k == 0 {
        bail!(Argument, "k_semantic must be at least 1");
    }
    let jitter = child_seed(seed, JITTER_SEED);
    let mut jobs = Vec::with_capacity(healthy_ids.len() * k);
    for (h, hid) in healthy_ids.iter().enumerate() {
        for v in 0..k {
            let index = (h * k + v) as u64;
            let mut r = stream(child_seed(seed, LESION_STREAM), index);
            jobs.push(SemanticJob {
                id: format!("semantic-{hid}-{v:03}"),
                healthy: h,
                lesion: r.random_range(0..tumor_ids.len()),
                seed: child_seed(jitter, index),
            });
        }
    }
    Ok(jobs)
}
