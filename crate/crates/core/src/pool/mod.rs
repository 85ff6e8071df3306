//! Augmentation pools and balanced batch sampling.
//!
//! Planning is pure: it decides which cases pair up, with which weights and
//! seeds. Producing the images is left to the caller.

mod batch;
mod manifest;
mod plan;

pub use batch::{real_quota, sample_batch, BatchSampler};
pub use manifest::{
    KindCounts, PoolManifest, Provenance, SampleEntry, SampleKind, SkipRecord, MANIFEST_VERSION,
};
pub use plan::{plan_semantic_pool, plan_spatial_pool, SemanticJob, SpatialJob};
