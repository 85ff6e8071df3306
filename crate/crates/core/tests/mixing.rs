//! Velocity mixing against single-field integration and closed forms.

use mixaug_core::inr::{integrate, ModelArch, VelocityFieldModel};
use mixaug_core::mixing::{
    apply_deformation, integrate_mixed, sample_mix_weights, BetaSampler, MixWeights,
};
use mixaug_core::volume::{GridSpec, LabelMask, Volume};
use proptest::prelude::*;

fn arch() -> ModelArch {
    ModelArch {
        mapping_dim: 16,
        freq_scale: 2.0,
        hidden: vec![32, 32],
    }
}

#[test]
fn unit_weight_matches_plain_integration() {
    let g = GridSpec::unit([8, 7, 6]);
    let a = VelocityFieldModel::new(&arch(), g.dims(), 11).unwrap();
    let b = VelocityFieldModel::new(&arch(), g.dims(), 12).unwrap();
    for steps in [1, 4, 8] {
        let w = MixWeights::new(1.0).unwrap();
        assert_eq!(
            integrate_mixed(&a, &b, w, &g, steps).unwrap(),
            integrate(&a, &g, steps).unwrap()
        );
        let w = MixWeights::new(0.0).unwrap();
        assert_eq!(
            integrate_mixed(&a, &b, w, &g, steps).unwrap(),
            integrate(&b, &g, steps).unwrap()
        );
    }
}

#[test]
fn swapping_models_and_weights_is_symmetric() {
    let g = GridSpec::unit([6, 6, 6]);
    let a = VelocityFieldModel::new(&arch(), g.dims(), 3).unwrap();
    let b = VelocityFieldModel::new(&arch(), g.dims(), 4).unwrap();
    let w = MixWeights::new(0.3).unwrap();
    let f1 = integrate_mixed(&a, &b, w, &g, 8).unwrap();
    let f2 = integrate_mixed(&b, &a, w.swapped(), &g, 8).unwrap();
    assert!(f1.max_abs_diff(&f2) <= 1e-12);
}

#[test]
fn constant_fields_blend_into_exact_translation() {
    let g = GridSpec::unit([5, 5, 5]);
    let a = VelocityFieldModel::constant(&arch(), g.dims(), [2.0, 0.0, -1.0]).unwrap();
    let b = VelocityFieldModel::constant(&arch(), g.dims(), [0.0, 4.0, 1.0]).unwrap();
    let w = MixWeights::new(0.25).unwrap();
    let f = integrate_mixed(&a, &b, w, &g, 8).unwrap();
    let expect = [0.5, 3.0, 0.5];
    for u in f.displacements() {
        for k in 0..3 {
            assert!((u[k] - expect[k]).abs() <= 1e-12, "{u:?}");
        }
    }
}

#[test]
fn beta_two_two_moments() {
    let mut s = BetaSampler::new(2024);
    let xs: Vec<f64> = (0..10_000)
        .map(|_| sample_mix_weights(&mut s).w1())
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    assert!((mean - 0.5).abs() <= 0.02, "mean {mean}");
    assert!((var - 0.05).abs() <= 0.005, "variance {var}");
}

#[test]
fn warp_is_deterministic() {
    let g = GridSpec::unit([8, 8, 8]);
    let a = VelocityFieldModel::new(&arch(), g.dims(), 5).unwrap();
    let b = VelocityFieldModel::new(&arch(), g.dims(), 6).unwrap();
    let img = Volume::from_fn(g.clone(), |x, y, z| (x + 2 * y + 3 * z) as f32).unwrap();
    let mask = LabelMask::from_predicate(g.clone(), |x, y, _| x > 3 && y > 2);
    let w = BetaSampler::new(1).draw(0);
    let run = || {
        let f = integrate_mixed(&a, &b, w, &g, 8).unwrap();
        apply_deformation(&img, &mask, &f).unwrap()
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn warped_labels_come_from_source(seed in 0u64..1000, w1 in 0.0f64..=1.0) {
        let g = GridSpec::unit([6, 6, 6]);
        let a = VelocityFieldModel::new(&arch(), g.dims(), seed).unwrap();
        let b = VelocityFieldModel::constant(&arch(), g.dims(), [1.3, -0.7, 0.4]).unwrap();
        let img = Volume::zeros(g.clone());
        let mask = LabelMask::from_fn(g.clone(), |x, y, z| ((x + y + z) % 3) as u8 * 2);
        let f = integrate_mixed(&a, &b, MixWeights::new(w1).unwrap(), &g, 4).unwrap();
        let (_, out) = apply_deformation(&img, &mask, &f).unwrap();
        prop_assert!(out.data().iter().all(|l| [0u8, 2, 4].contains(l)));
    }
}

#[test]
fn constant_pair_and_zero_models() {
    let g = GridSpec::unit([4, 4, 4]);
    let a = VelocityFieldModel::constant(&arch(), g.dims(), [1.0, 0.0, 0.0]).unwrap();
    let b = VelocityFieldModel::constant(&arch(), g.dims(), [3.0, 0.0, 0.0]).unwrap();
    let f = integrate_mixed(&a, &b, MixWeights::new(0.5).unwrap(), &g, 8).unwrap();
    assert!(f.displacements().all(|u| u == [2.0, 0.0, 0.0]));

    let z1 = VelocityFieldModel::zeros(&arch(), g.dims(), 1).unwrap();
    let z2 = VelocityFieldModel::zeros(&arch(), g.dims(), 2).unwrap();
    let f = integrate_mixed(&z1, &z2, MixWeights::new(0.4).unwrap(), &g, 8).unwrap();
    assert_eq!(f, mixaug_core::inr::DeformationField::identity(g));
}

#[test]
fn integer_translation_shifts_with_zero_fill() {
    let g = GridSpec::unit([6, 5, 4]);
    let a = VelocityFieldModel::constant(&arch(), g.dims(), [2.0, 0.0, 0.0]).unwrap();
    let f = integrate(&a, &g, 8).unwrap();
    let img = Volume::from_fn(g.clone(), |x, y, z| 1.0 + (x + 10 * y + 100 * z) as f32).unwrap();
    let mask = LabelMask::from_fn(g.clone(), |x, y, _| (x + y) as u8 % 3);
    let (i2, m2) = apply_deformation(&img, &mask, &f).unwrap();
    for z in 0..4 {
        for y in 0..5 {
            for x in 0..6 {
                let (vi, vm) = if x + 2 < 6 {
                    (img.get(x + 2, y, z), mask.get(x + 2, y, z))
                } else {
                    (0.0, 0)
                };
                assert_eq!(i2.get(x, y, z), vi);
                assert_eq!(m2.get(x, y, z), vm);
            }
        }
    }
}
