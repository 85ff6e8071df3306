use alloc::vec::Vec;

use super::{GridSpec, LabelMask, Volume};
use crate::error::Result;
use crate::linalg::{mat4_mul, transform_point, Mat4, Vec3, IDENTITY4};

/// Interpolation used when resampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

/// Lower corner index and fractional offset along one axis, or `None` when
/// `c` lies outside `[0, n - 1]`.
#[inline]
fn axis_cell(c: f64, n: usize) -> Option<(usize, usize, f64)> {
    if !(c >= 0.0 && c <= (n - 1) as f64) {
        return None;
    }
    let i0 = libm::floor(c) as usize;
    if i0 + 1 >= n {
        // On the last voxel plane: weight of the upper neighbour is zero.
        return Some((n - 1, n - 1, 0.0));
    }
    Some((i0, i0 + 1, c - i0 as f64))
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Trilinear interpolation at continuous voxel coordinates `p`.
///
/// Returns 0 outside `[0, dim - 1]` on any axis. At integer coordinates
/// the stored value is returned exactly.
pub fn sample_trilinear(vol: &Volume, p: Vec3) -> f64 {
    let [nx, ny, nz] = vol.dims();
    let (Some((x0, x1, fx)), Some((y0, y1, fy)), Some((z0, z1, fz))) = (
        axis_cell(p[0], nx),
        axis_cell(p[1], ny),
        axis_cell(p[2], nz),
    ) else {
        return 0.0;
    };
    let g = vol.grid();
    let d = vol.data();
    let v = |x, y, z| f64::from(d[g.index(x, y, z)]);
    let c00 = lerp(v(x0, y0, z0), v(x1, y0, z0), fx);
    let c10 = lerp(v(x0, y1, z0), v(x1, y1, z0), fx);
    let c01 = lerp(v(x0, y0, z1), v(x1, y0, z1), fx);
    let c11 = lerp(v(x0, y1, z1), v(x1, y1, z1), fx);
    let c0 = lerp(c00, c10, fy);
    let c1 = lerp(c01, c11, fy);
    lerp(c0, c1, fz)
}

/// Trilinear value and its gradient with respect to `p`.
///
/// The gradient is the derivative of the trilinear basis inside the
/// enclosing cell (one-sided on the last voxel plane); zero outside the
/// support.
pub fn sample_trilinear_with_gradient(vol: &Volume, p: Vec3) -> (f64, Vec3) {
    let [nx, ny, nz] = vol.dims();
    let (Some(cx), Some(cy), Some(cz)) = (
        axis_cell(p[0], nx),
        axis_cell(p[1], ny),
        axis_cell(p[2], nz),
    ) else {
        return (0.0, [0.0; 3]);
    };
    // On the last plane use the cell below so the slope is defined.
    let widen = |(i0, i1, f): (usize, usize, f64)| {
        if i0 == i1 && i0 > 0 {
            (i0 - 1, i0, 1.0)
        } else {
            (i0, i1, f)
        }
    };
    let (x0, x1, fx) = widen(cx);
    let (y0, y1, fy) = widen(cy);
    let (z0, z1, fz) = widen(cz);
    let g = vol.grid();
    let d = vol.data();
    let v = |x, y, z| f64::from(d[g.index(x, y, z)]);
    let v000 = v(x0, y0, z0);
    let v100 = v(x1, y0, z0);
    let v010 = v(x0, y1, z0);
    let v110 = v(x1, y1, z0);
    let v001 = v(x0, y0, z1);
    let v101 = v(x1, y0, z1);
    let v011 = v(x0, y1, z1);
    let v111 = v(x1, y1, z1);
    let c00 = lerp(v000, v100, fx);
    let c10 = lerp(v010, v110, fx);
    let c01 = lerp(v001, v101, fx);
    let c11 = lerp(v011, v111, fx);
    let c0 = lerp(c00, c10, fy);
    let c1 = lerp(c01, c11, fy);
    let value = lerp(c0, c1, fz);

    let sx = |a: f64, b: f64| if x0 == x1 { 0.0 } else { b - a };
    let sy = |a: f64, b: f64| if y0 == y1 { 0.0 } else { b - a };
    let sz = |a: f64, b: f64| if z0 == z1 { 0.0 } else { b - a };
    let dx0 = lerp(sx(v000, v100), sx(v010, v110), fy);
    let dx1 = lerp(sx(v001, v101), sx(v011, v111), fy);
    let dx = lerp(dx0, dx1, fz);
    let dy = lerp(sy(c00, c10), sy(c01, c11), fz);
    let dz = sz(c0, c1);
    (value, [dx, dy, dz])
}

#[inline]
fn nearest_index(c: f64, n: usize) -> Option<usize> {
    let r = libm::floor(c + 0.5);
    (r >= 0.0 && r < n as f64).then_some(r as usize)
}

/// Nearest-neighbour label lookup with half-up rounding; 0 outside the grid.
pub fn sample_nearest(mask: &LabelMask, p: Vec3) -> u8 {
    let [nx, ny, nz] = mask.dims();
    match (
        nearest_index(p[0], nx),
        nearest_index(p[1], ny),
        nearest_index(p[2], nz),
    ) {
        (Some(x), Some(y), Some(z)) => mask.get(x, y, z),
        _ => 0,
    }
}

/// Nearest-neighbour intensity lookup, same rounding as [`sample_nearest`].
pub fn sample_nearest_value(vol: &Volume, p: Vec3) -> f64 {
    let [nx, ny, nz] = vol.dims();
    match (
        nearest_index(p[0], nx),
        nearest_index(p[1], ny),
        nearest_index(p[2], nz),
    ) {
        (Some(x), Some(y), Some(z)) => f64::from(vol.get(x, y, z)),
        _ => 0.0,
    }
}

/// Snaps coordinates that are within rounding noise of a voxel center.
#[inline]
fn snap(p: Vec3) -> Vec3 {
    p.map(|c| {
        let r = libm::round(c);
        if (c - r).abs() < 1e-9 {
            r
        } else {
            c
        }
    })
}

/// Source voxel coordinates for every voxel of `target`, via world space.
fn source_coords(src: &GridSpec, target: &GridSpec) -> impl Iterator<Item = Vec3> {
    mapped_coords(src, &IDENTITY4, target)
}

/// Source voxel coordinates of `world_map(target voxel)` for every voxel of
/// `target`, in x-fastest order.
pub(crate) fn mapped_coords(
    src: &GridSpec,
    world_map: &Mat4,
    target: &GridSpec,
) -> impl Iterator<Item = Vec3> {
    let map = mat4_mul(src.inverse_affine(), &mat4_mul(world_map, target.affine()));
    let [nx, ny, nz] = target.dims();
    (0..nz).flat_map(move |z| {
        (0..ny).flat_map(move |y| {
            (0..nx).map(move |x| snap(transform_point(&map, [x as f64, y as f64, z as f64])))
        })
    })
}

/// Resamples `vol` onto `target`, sampling at each target voxel's world
/// position. Out-of-support samples are 0.
pub fn resample_volume(vol: &Volume, target: &GridSpec, mode: Interpolation) -> Result<Volume> {
    let data: Vec<f32> = source_coords(vol.grid(), target)
        .map(|p| match mode {
            Interpolation::Trilinear => sample_trilinear(vol, p) as f32,
            Interpolation::Nearest => sample_nearest_value(vol, p) as f32,
        })
        .collect();
    Ok(Volume::from_parts_unchecked(target.clone(), data))
}

/// Resamples a label mask onto `target` with nearest-neighbour lookup.
pub fn resample_mask(mask: &LabelMask, target: &GridSpec) -> LabelMask {
    let data: Vec<u8> = source_coords(mask.grid(), target)
        .map(|p| sample_nearest(mask, p))
        .collect();
    LabelMask::new(target.clone(), data).expect("target length matches")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Volume {
        let g = GridSpec::unit([4, 5, 6]);
        Volume::from_fn(g, |x, y, z| (x + 10 * y + 100 * z) as f32).unwrap()
    }

    #[test]
    fn exact_at_grid_points() {
        let v = ramp();
        assert_eq!(sample_trilinear(&v, [2.0, 3.0, 4.0]), 432.0);
        assert_eq!(sample_trilinear(&v, [3.0, 4.0, 5.0]), 543.0);
    }

    #[test]
    fn midpoint_and_fill() {
        let g = GridSpec::unit([2, 1, 1]);
        let v = Volume::new(g, alloc::vec![0.0, 1.0]).unwrap();
        assert_eq!(sample_trilinear(&v, [0.5, 0.0, 0.0]), 0.5);
        assert_eq!(sample_trilinear(&v, [-5.0, 0.0, 0.0]), 0.0);
        assert_eq!(sample_trilinear(&v, [1.0001, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn gradient_matches_linear_ramp() {
        let v = ramp();
        let (val, g) = sample_trilinear_with_gradient(&v, [1.25, 2.5, 3.75]);
        assert!((val - (1.25 + 25.0 + 375.0)).abs() < 1e-9);
        assert!((g[0] - 1.0).abs() < 1e-12);
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert!((g[2] - 100.0).abs() < 1e-12);
        let (_, g_edge) = sample_trilinear_with_gradient(&v, [3.0, 4.0, 5.0]);
        assert_eq!(g_edge, [1.0, 10.0, 100.0]);
        assert_eq!(
            sample_trilinear_with_gradient(&v, [-1.0, 0.0, 0.0]).1,
            [0.0; 3]
        );
    }

    #[test]
    fn nearest_rounds_half_up() {
        let g = GridSpec::unit([3, 4, 2]);
        let m = LabelMask::from_fn(g, |x, y, z| (x + 3 * y + 12 * z) as u8);
        assert_eq!(sample_nearest(&m, [1.4, 2.6, 0.0]), m.get(1, 3, 0));
        assert_eq!(sample_nearest(&m, [0.5, 0.5, 0.5]), m.get(1, 1, 1));
        assert_eq!(sample_nearest(&m, [2.0, 1.0, 1.0]), m.get(2, 1, 1));
        assert_eq!(sample_nearest(&m, [2.6, 0.0, 0.0]), 0);
        assert_eq!(sample_nearest(&m, [-0.6, 0.0, 0.0]), 0);
    }

    #[test]
    fn identity_resample_is_exact() {
        let v = ramp();
        let out = resample_volume(&v, v.grid(), Interpolation::Trilinear).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn ramp_at_double_spacing() {
        let g = GridSpec::unit([8, 1, 1]);
        let v = Volume::from_fn(g, |x, _, _| x as f32).unwrap();
        let mut a = IDENTITY4;
        a[0][0] = 2.0;
        let target = GridSpec::new([4, 1, 1], a).unwrap();
        let out = resample_volume(&v, &target, Interpolation::Trilinear).unwrap();
        assert_eq!(out.data(), &[0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn nearest_mask_resample_keeps_labels() {
        let g = GridSpec::unit([6, 6, 6]);
        let m = LabelMask::from_predicate(g, |x, y, z| x + y > z + 2);
        let target = GridSpec::with_spacing([9, 9, 9], [0.6, 0.6, 0.6]).unwrap();
        let out = resample_mask(&m, &target);
        assert!(out.labels().iter().all(|l| *l <= 1));
    }
}
