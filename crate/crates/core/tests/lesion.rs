//! Lesion injection pieces against brute-force and analytic oracles.

use mixaug_core::lesion::{
    alpha_map, apply_rigid, fuse, inject_lesion, match_histogram, mutual_information, pve_blur,
    register_rigid, signed_distance, AlphaMap, InjectionConfig, RegistrationStatus, RigidTransform,
};
use mixaug_core::phantom::BrainPhantom;
use mixaug_core::volume::{erode, GridSpec, LabelMask, Volume};
use mixaug_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_force_sdf(mask: &LabelMask) -> Vec<f64> {
    let g = mask.grid();
    let pts: Vec<[usize; 3]> = (0..g.len()).map(|i| g.coords(i)).collect();
    let m = mask.data();
    (0..g.len())
        .map(|i| {
            let inside = m[i] != 0;
            let best = (0..g.len())
                .filter(|&j| (m[j] != 0) != inside)
                .map(|j| {
                    (0..3)
                        .map(|k| (pts[i][k] as f64 - pts[j][k] as f64).powi(2))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            if inside {
                best
            } else {
                -best
            }
        })
        .collect()
}

#[test]
fn sdf_matches_brute_force_on_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 100 {
        let dims = [
            rng.random_range(1..=12),
            rng.random_range(1..=12),
            rng.random_range(1..=12),
        ];
        let density = rng.random_range(0.05..0.9);
        let mask =
            LabelMask::from_predicate(GridSpec::unit(dims), |_, _, _| rng.random_bool(density));
        let Ok(sdf) = signed_distance(&mask) else {
            continue;
        };
        let oracle = brute_force_sdf(&mask);
        for (a, b) in sdf.values().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9, "{dims:?}: {a} vs {b}");
        }
        checked += 1;
    }
}

fn random_volume(dims: [usize; 3], rng: &mut ChaCha8Rng) -> Volume {
    Volume::from_fn(GridSpec::unit(dims), |_, _, _| {
        rng.random_range(0.0..100.0f32)
    })
    .unwrap()
}

#[test]
fn mi_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_volume([16; 3], &mut rng);
    let b = a.map(|v| v * 0.5 + (v * 0.37).sin() * 20.0).unwrap();
    let region = LabelMask::from_predicate(a.grid().clone(), |x, y, _| x + y > 5);
    let bins = 16;
    let sel: Vec<(f64, f64)> = a
        .data()
        .iter()
        .zip(b.data())
        .zip(region.data())
        .filter(|(_, &m)| m != 0)
        .map(|((&x, &y), _)| (f64::from(x), f64::from(y)))
        .collect();
    let bin = |vals: Vec<f64>| {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        vals.into_iter()
            .map(|v| (((v - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1))
            .collect::<Vec<_>>()
    };
    let ia = bin(sel.iter().map(|p| p.0).collect());
    let ib = bin(sel.iter().map(|p| p.1).collect());
    let n = sel.len() as f64;
    let mut joint = vec![vec![0.0; bins]; bins];
    for (i, j) in ia.iter().zip(&ib) {
        joint[*i][*j] += 1.0 / n;
    }
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let pb: Vec<f64> = (0..bins)
        .map(|j| joint.iter().map(|r| r[j]).sum())
        .collect();
    let mut oracle = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            if joint[i][j] > 0.0 {
                oracle += joint[i][j] * (joint[i][j] / (pa[i] * pb[j])).ln();
            }
        }
    }
    let mi = mutual_information(&a, &b, &region, bins).unwrap();
    assert!((mi - oracle).abs() <= 1e-12, "{mi} vs {oracle}");
}

fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn region_values(v: &Volume, m: &LabelMask) -> Vec<f64> {
    v.data()
        .iter()
        .zip(m.data())
        .filter(|(_, &l)| l != 0)
        .map(|(&x, _)| f64::from(x))
        .collect()
}

#[test]
fn histogram_matching_ks_and_monotone() {
    let bins = 256;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GridSpec::unit([24; 3]);
        let src = Volume::from_fn(g.clone(), |_, _, _| {
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            let mode = if rng.random_bool(0.3) { 25.0 } else { 0.0 };
            (40.0 + mode + 15.0 * (u + v)) as f32
        })
        .unwrap();
        let reference = Volume::from_fn(g.clone(), |_, _, _| {
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            (100.0 + 20.0 * (-2.0 * u.max(1e-12).ln()).sqrt() * (std::f64::consts::TAU * v).cos())
                as f32
        })
        .unwrap();
        let sr = LabelMask::from_predicate(g.clone(), |x, _, _| x > 3);
        let rr = LabelMask::from_predicate(g.clone(), |_, y, z| y + z > 6);
        let out = match_histogram(&src, &reference, &sr, &rr, bins).unwrap();
        let ks = ks_distance(region_values(&out, &sr), region_values(&reference, &rr));
        assert!(ks <= 2.0 / bins as f64, "seed {seed}: ks {ks}");
        let mut pairs: Vec<(f32, f32)> = src
            .data()
            .iter()
            .copied()
            .zip(out.data().iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[1].1 >= w[0].1));
    }
}

#[test]
fn histogram_matching_halves_uniform_range() {
    let g = GridSpec::unit([256, 4, 1]);
    let src = Volume::from_fn(g.clone(), |x, _, _| x as f32).unwrap();
    let reference = Volume::from_fn(g.clone(), |x, _, _| (x / 2) as f32).unwrap();
    let all = LabelMask::from_predicate(g, |_, _, _| true);
    let out = match_histogram(&src, &reference, &all, &all, 256).unwrap();
    let width = 255.0 / 256.0;
    for (s, o) in src.data().iter().zip(out.data()) {
        assert!((o - s / 2.0).abs() <= width, "{s} -> {o}");
    }
    let same = match_histogram(&src, &src, &all, &all, 256).unwrap();
    for (s, o) in src.data().iter().zip(same.data()) {
        assert!((o - s).abs() <= width);
    }
}

fn phantom(n: usize, seed: u64) -> (BrainPhantom, GridSpec) {
    (BrainPhantom::new(n, seed), GridSpec::unit([n; 3]))
}

#[test]
fn rigid_round_trip_stays_close() {
    let (p, g) = phantom(32, 1);
    let v = p.render(&g, [0.0; 3]);
    let a = RigidTransform::from_euler_zyx([0.1, -0.05, 0.2], [1.3, -0.7, 0.4], g.center_world());
    let back = apply_rigid(&apply_rigid(&v, &a, &g), &a.inverse(), &g);
    let (lo, hi) = v
        .data()
        .iter()
        .fold((f32::MAX, f32::MIN), |(l, h), &x| (l.min(x), h.max(x)));
    let interior = erode(&p.brain_mask(&g), 3);
    for (i, (&a, &b)) in v.data().iter().zip(back.data()).enumerate() {
        if interior.contains(i) {
            assert!((a - b).abs() <= 0.02 * (hi - lo), "{a} vs {b}");
        }
    }
}

#[test]
fn self_registration_is_identity() {
    let (p, g) = phantom(32, 2);
    let v = p.render(&g, [0.0; 3]);
    let r = register_rigid(&v, &v, &p.brain_mask(&g), &InjectionConfig::default()).unwrap();
    let t = r.transform.offset();
    assert!(t.iter().all(|c| c.abs() <= 0.5), "{t:?}");
    assert!(r.transform.rotation_angle().to_degrees() <= 1.0);
    assert!(r.mi_final >= r.mi_initial);
}

#[test]
fn registration_recovers_translation() {
    let (p, g) = phantom(48, 3);
    let fixed = p.render(&g, [0.0; 3]);
    let truth = [4.0, -3.0, 2.0];
    let moving = p.render(&g, truth);
    let r = register_rigid(
        &moving,
        &fixed,
        &p.brain_mask(&g),
        &InjectionConfig::default(),
    )
    .unwrap();
    assert_eq!(r.status, RegistrationStatus::Improved);
    let t = r.transform.offset();
    for k in 0..3 {
        assert!((t[k] - truth[k]).abs() <= 0.5, "{t:?}");
    }
    assert!(r.transform.rotation_angle().to_degrees() <= 1.0);
    assert!(r.mi_final >= r.mi_initial);
}

#[test]
fn pve_blur_leaves_off_band_voxels_untouched() {
    let (p, g) = phantom(20, 4);
    let bg = p.render(&g, [0.0; 3]);
    let mask = LabelMask::from_predicate(g.clone(), |x, y, z| {
        let d = [x as f64 - 9.0, y as f64 - 10.0, z as f64 - 8.0];
        d.iter().map(|v| v * v).sum::<f64>() <= 25.0
    });
    let sdf = signed_distance(&mask).unwrap();
    let out = pve_blur(&bg, &sdf, 4.0, 1.0).unwrap();
    for ((a, b), s) in bg.data().iter().zip(out.data()).zip(sdf.values()) {
        if s.abs() >= 4.0 {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
    let flat = Volume::from_fn(g, |_, _, _| 42.5).unwrap();
    assert_eq!(pve_blur(&flat, &sdf, 4.0, 1.0).unwrap(), flat);
}

fn small_config(seed: u64) -> InjectionConfig {
    InjectionConfig {
        max_translation: 2.0,
        max_rotation_deg: 10.0,
        seed,
        ..InjectionConfig::default()
    }
}

struct Case {
    image: Volume,
    tumor: LabelMask,
    healthy: Volume,
    healthy_brain: LabelMask,
}

fn case(n: usize) -> Case {
    let g = GridSpec::unit([n; 3]);
    let sick = BrainPhantom::new(n, 10).with_tumor(n, 0.12, 11);
    let well = BrainPhantom::new(n, 12);
    Case {
        image: sick.render(&g, [0.0; 3]),
        tumor: sick.tumor_mask(&g),
        healthy: well.render(&g, [1.0, -1.0, 0.5]),
        healthy_brain: well.brain_mask(&g),
    }
}

#[test]
fn injection_respects_band_structure() {
    let c = case(32);
    let cfg = small_config(7);
    let out = inject_lesion(&c.image, &c.tumor, None, &c.healthy, &c.healthy_brain, &cfg).unwrap();
    assert_eq!(
        out.mask.count_nonzero(),
        out.mask.binarize().count_nonzero()
    );
    let sdf = signed_distance(&out.mask.binarize()).unwrap();
    let texture = apply_rigid(&c.image, &out.jitter, c.image.grid());
    for (i, s) in sdf.values().iter().enumerate() {
        if *s <= -cfg.tau {
            assert_eq!(
                out.image.data()[i].to_bits(),
                out.background.data()[i].to_bits()
            );
        }
        if *s > cfg.tau {
            assert_eq!(out.image.data()[i].to_bits(), texture.data()[i].to_bits());
        }
        if *s > 0.0 {
            assert!(out.mask.contains(i));
        }
    }
    let again =
        inject_lesion(&c.image, &c.tumor, None, &c.healthy, &c.healthy_brain, &cfg).unwrap();
    assert_eq!(out, again);
}

#[test]
fn impossible_placement_reports_placement_error() {
    let c = case(24);
    let tiny = LabelMask::from_predicate(c.healthy.grid().clone(), |x, y, z| {
        (x, y, z) == (12, 12, 12)
    });
    let err = inject_lesion(
        &c.image,
        &c.tumor,
        None,
        &c.healthy,
        &tiny,
        &small_config(1),
    )
    .unwrap_err();
    assert!(
        matches!(err, Error::Placement { attempts: 50 } | Error::Argument(_)),
        "{err:?}"
    );
}

proptest! {
    #[test]
    fn fused_values_lie_between_inputs(vals in prop::collection::vec((-1e3f32..1e3, -1e3f32..1e3, 0.0f64..=1.0), 1..40)) {
        let g = GridSpec::unit([vals.len(), 1, 1]);
        let l = Volume::new(g.clone(), vals.iter().map(|v| v.0).collect()).unwrap();
        let b = Volume::new(g.clone(), vals.iter().map(|v| v.1).collect()).unwrap();
        let a = AlphaMap::from_weights(g, 4.0, vals.iter().map(|v| v.2).collect()).unwrap();
        let f = fuse(&l, &b, &a).unwrap();
        for (i, v) in f.data().iter().enumerate() {
            let (lo, hi) = (vals[i].0.min(vals[i].1), vals[i].0.max(vals[i].1));
            prop_assert!(*v >= lo && *v <= hi);
        }
    }

    #[test]
    fn alpha_positive_only_inside(seed in 0u64..500, tau in 0.5f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = LabelMask::from_predicate(GridSpec::unit([7, 6, 5]), |_, _, _| rng.random_bool(0.4));
        if let Ok(sdf) = signed_distance(&mask) {
            let a = alpha_map(&sdf, tau).unwrap();
            for (i, w) in a.weights().iter().enumerate() {
                prop_assert!(*w == 0.0 || mask.contains(i));
            }
        }
    }

    #[test]
    fn mutual_information_is_symmetric(seed in 0u64..200, bins in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_volume([6, 6, 6], &mut rng);
        let b = random_volume([6, 6, 6], &mut rng);
        let r = LabelMask::from_predicate(a.grid().clone(), |x, _, _| x > 1);
        let ab = mutual_information(&a, &b, &r, bins).unwrap();
        let ba = mutual_information(&b, &a, &r, bins).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12);
    }
}
