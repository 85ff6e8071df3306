//! Pool planning arithmetic and per-batch quota enforcement.

use mixaug_core::mixing::{BetaSampler, MixWeights};
use mixaug_core::pool::{
    plan_semantic_pool, plan_spatial_pool, real_quota, sample_batch, BatchSampler, PoolManifest,
    Provenance, SampleEntry, SampleKind,
};
use mixaug_core::rng::stream;
use proptest::prelude::*;

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:03}")).collect()
}

fn synthetic_manifest(real: usize, spatial: usize, semantic: usize, r_real: f64) -> PoolManifest {
    let mut entries: Vec<SampleEntry> = (0..real)
        .map(|i| SampleEntry::real(format!("r{i}"), "i", "m"))
        .collect();
    entries.extend((0..spatial).map(|i| {
        SampleEntry::synthetic(
            format!("sp{i}"),
            "i",
            "m",
            Provenance::Spatial {
                source: "a".into(),
                targets: ["b".into(), "c".into()],
                weights: MixWeights::new(0.5).unwrap(),
                seed: i as u64,
                config_hash: String::new(),
            },
        )
    }));
    entries.extend((0..semantic).map(|i| {
        SampleEntry::synthetic(
            format!("se{i}"),
            "i",
            "m",
            Provenance::Semantic {
                lesion: "a".into(),
                healthy: "h".into(),
                seed: i as u64,
                config_hash: String::new(),
            },
        )
    }));
    PoolManifest::new(7, r_real, entries, vec![]).unwrap()
}

#[test]
fn pool_sizes_follow_the_product_rule() {
    let s = BetaSampler::new(1);
    assert_eq!(plan_spatial_pool(&ids("t", 5), 4, &s).unwrap().len(), 20);
    assert_eq!(
        plan_spatial_pool(&ids("t", 73), 20, &s).unwrap().len(),
        1460
    );
    assert_eq!(
        plan_semantic_pool(&ids("t", 5), &ids("h", 6), 5, 1)
            .unwrap()
            .len(),
        30
    );
    assert_eq!(
        plan_semantic_pool(&ids("t", 73), &ids("h", 362), 5, 1)
            .unwrap()
            .len(),
        1810
    );
}

#[test]
fn planning_is_deterministic_and_seed_sensitive() {
    let a = plan_spatial_pool(&ids("t", 6), 3, &BetaSampler::new(4)).unwrap();
    let b = plan_spatial_pool(&ids("t", 6), 3, &BetaSampler::new(4)).unwrap();
    let c = plan_spatial_pool(&ids("t", 6), 3, &BetaSampler::new(5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let tumors = ids("t", 4);
    let jobs = plan_semantic_pool(&tumors, &ids("h", 3), 4, 2).unwrap();
    assert!(jobs.iter().all(|j| j.lesion < tumors.len()));
    assert_eq!(
        jobs,
        plan_semantic_pool(&tumors, &ids("h", 3), 4, 2).unwrap()
    );
}

#[test]
fn every_batch_meets_its_quota() {
    let m = synthetic_manifest(73, 1460, 1810, 0.5);
    let sampler = BatchSampler::new(&m, 4, 0.5).unwrap();
    let mut rng = stream(11, 0);
    let (mut spatial, mut semantic) = (0usize, 0usize);
    for _ in 0..10_000 {
        let batch = sampler.sample(&mut rng);
        assert_eq!(batch.len(), 4);
        assert_eq!(
            batch.iter().filter(|e| e.kind == SampleKind::Real).count(),
            2
        );
        spatial += batch
            .iter()
            .filter(|e| e.kind == SampleKind::SpatialAug)
            .count();
        semantic += batch
            .iter()
            .filter(|e| e.kind == SampleKind::SemanticAug)
            .count();
    }
    let share = spatial as f64 / (spatial + semantic) as f64;
    let expected = 1460.0 / (1460.0 + 1810.0);
    assert!((share - expected).abs() <= 0.02, "{share} vs {expected}");
}

#[test]
fn endpoints_and_empty_strata() {
    let m = synthetic_manifest(5, 0, 0, 1.0);
    let mut rng = stream(0, 0);
    let b = sample_batch(&m, 6, &mut rng).unwrap();
    assert!(b.iter().all(|e| e.kind == SampleKind::Real));
    assert!(BatchSampler::new(&m, 4, 0.5).is_err());
    let only_synth = synthetic_manifest(0, 3, 3, 0.5);
    assert!(sample_batch(&only_synth, 4, &mut rng).is_err());
    assert!(BatchSampler::new(&only_synth, 0, 0.5).is_err());
}

#[test]
fn sampling_is_reproducible() {
    let m = synthetic_manifest(10, 20, 30, 0.5);
    let run = || {
        let mut rng = stream(3, 1);
        (0..50)
            .map(|_| {
                sample_batch(&m, 4, &mut rng)
                    .unwrap()
                    .iter()
                    .map(|e| e.id.clone())
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn quota_is_exact_per_batch(b in 1usize..64, r in 0.01f64..=1.0, seed in 0u64..1000) {
        let m = synthetic_manifest(7, 5, 4, 0.5);
        let sampler = BatchSampler::new(&m, b, r).unwrap();
        let mut rng = stream(seed, 0);
        for _ in 0..20 {
            let batch = sampler.sample(&mut rng);
            prop_assert_eq!(batch.len(), b);
            prop_assert_eq!(batch.iter().filter(|e| e.kind == SampleKind::Real).count(), real_quota(b, r));
        }
    }

    #[test]
    fn spatial_targets_are_distinct_others(n in 3usize..20, k in 1usize..5, seed in 0u64..1000) {
        for j in plan_spatial_pool(&ids("t", n), k, &BetaSampler::new(seed)).unwrap() {
            prop_assert!(j.targets[0] < n && j.targets[1] < n);
            prop_assert!(j.targets[0] != j.source && j.targets[1] != j.source);
            prop_assert!(j.targets[0] != j.targets[1]);
        }
    }
}
