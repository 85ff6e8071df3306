use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::mi::mi_from_samples;
use super::{InjectionConfig, RigidTransform};
use crate::error::{bail, Result};
use crate::linalg::{mat4_mul, transform_point, Mat4, Vec3};
use crate::volume::{check_region, sample_trilinear, GridSpec, LabelMask, Volume};

const PYRAMID: [usize; 3] = [4, 2, 1];
const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Whether the optimizer found a transform better than the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegistrationStatus {
    Improved,
    /// No level improved on the identity; the identity is returned.
    NotImproved,
}

/// Outcome of [`register_rigid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidRegistration {
    /// Maps moving-image world coordinates onto the fixed image.
    pub transform: RigidTransform,
    pub mi_initial: f64,
    pub mi_final: f64,
    pub status: RegistrationStatus,
}

fn block_mean(vol: &Volume, f: usize) -> Result<Volume> {
    if f == 1 {
        return Ok(vol.clone());
    }
    let g = vol.grid().downsampled(f)?;
    let inv = 1.0 / (f * f * f) as f64;
    Volume::from_fn(g, |x, y, z| {
        let mut s = 0.0;
        for dz in 0..f {
            for dy in 0..f {
                for dx in 0..f {
                    s += f64::from(vol.get(x * f + dx, y * f + dy, z * f + dz));
                }
            }
        }
        (s * inv) as f32
    })
}

fn block_majority(mask: &LabelMask, f: usize) -> Result<LabelMask> {
    if f == 1 {
        return Ok(mask.binarize());
    }
    let g = mask.grid().downsampled(f)?;
    let n = f * f * f;
    Ok(LabelMask::from_predicate(g, |x, y, z| {
        let mut c = 0;
        for dz in 0..f {
            for dy in 0..f {
                for dx in 0..f {
                    c += usize::from(mask.get(x * f + dx, y * f + dy, z * f + dz) != 0);
                }
            }
        }
        2 * c >= n
    }))
}

/// Fixed-image samples and the moving image at one pyramid level.
struct Level {
    points: Vec<Vec3>,
    fixed: Vec<f64>,
    moving: Volume,
    factor: usize,
}

impl Level {
    fn build(moving: &Volume, fixed: &Volume, brain: &LabelMask, f: usize) -> Result<Option<Self>> {
        if fixed
            .dims()
            .iter()
            .chain(moving.dims().iter())
            .any(|&d| d / f < 4)
            && f > 1
        {
            return Ok(None);
        }
        let fv = block_mean(fixed, f)?;
        let fm = block_majority(brain, f)?;
        if fm.count_nonzero() == 0 {
            return Ok(None);
        }
        let g = fv.grid();
        let mut points = Vec::new();
        let mut vals = Vec::new();
        for (i, (&v, &m)) in fv.data().iter().zip(fm.data()).enumerate() {
            if m != 0 {
                let [x, y, z] = g.coords(i);
                points.push(g.voxel_to_world([x as f64, y as f64, z as f64]));
                vals.push(f64::from(v));
            }
        }
        Ok(Some(Self {
            points,
            fixed: vals,
            moving: block_mean(moving, f)?,
            factor: f,
        }))
    }

    fn mi(&self, a: &RigidTransform, bins: usize) -> f64 {
        let map: Mat4 = mat4_mul(self.moving.grid().inverse_affine(), a.inverse().matrix());
        let warped: Vec<f64> = self
            .points
            .iter()
            .map(|p| sample_trilinear(&self.moving, transform_point(&map, *p)))
            .collect();
        mi_from_samples(&self.fixed, &warped, bins)
    }
}

/// Rigid parameters `[tx, ty, tz, r·ax, r·ay, r·az]` in mm about `center`.
struct Parameterization {
    center: Vec3,
    radius: f64,
}

impl Parameterization {
    fn new(grid: &GridSpec) -> Self {
        let sp = grid.spacing();
        let dims = grid.dims();
        let radius = (0..3)
            .map(|k| 0.5 * (dims[k] as f64 - 1.0) * sp[k])
            .sum::<f64>()
            / 3.0;
        Self {
            center: grid.center_world(),
            radius: radius.max(1.0),
        }
    }

    fn transform(&self, p: &[f64; 6]) -> RigidTransform {
        let angles = [p[3] / self.radius, p[4] / self.radius, p[5] / self.radius];
        RigidTransform::from_euler_zyx(angles, [p[0], p[1], p[2]], self.center)
    }
}

fn axpy(x: &[f64; 6], a: f64, d: &[f64; 6]) -> [f64; 6] {
    core::array::from_fn(|i| x[i] + a * d[i])
}

/// Minimizes `f` along `d` from `x`; never returns a worse value than `fx`.
fn line_minimize(
    f: &mut impl FnMut(&[f64; 6]) -> f64,
    x: &[f64; 6],
    fx: f64,
    d: &[f64; 6],
    step: f64,
    tol: f64,
) -> ([f64; 6], f64) {
    let mut phi = |a: f64| f(&axpy(x, a, d));
    let (mut a, mut b, mut c, mut fb);
    let fp = phi(step);
    if fp < fx {
        let (mut prev, mut cur, mut fcur) = (0.0, step, fp);
        let mut next = cur + 1.618 * (cur - prev);
        let mut fnext = phi(next);
        for _ in 0..12 {
            if fnext >= fcur {
                break;
            }
            prev = cur;
            cur = next;
            fcur = fnext;
            next = cur + 1.618 * (cur - prev);
            fnext = phi(next);
        }
        (a, b, c, fb) = (prev, cur, next, fcur);
        if fnext < fcur {
            return (axpy(x, next, d), fnext);
        }
    } else {
        let fm = phi(-step);
        if fm < fx {
            let (mut prev, mut cur, mut fcur) = (0.0, -step, fm);
            let mut next = cur + 1.618 * (cur - prev);
            let mut fnext = phi(next);
            for _ in 0..12 {
                if fnext >= fcur {
                    break;
                }
                prev = cur;
                cur = next;
                fcur = fnext;
                next = cur + 1.618 * (cur - prev);
                fnext = phi(next);
            }
            if fnext < fcur {
                return (axpy(x, next, d), fnext);
            }
            (a, b, c, fb) = (next, cur, prev, fcur);
        } else {
            (a, b, c, fb) = (-step, 0.0, step, fx);
        }
    }
    for _ in 0..60 {
        if c - a <= tol {
            break;
        }
        let t = if c - b > b - a {
            b + GOLDEN * (c - b)
        } else {
            b - GOLDEN * (b - a)
        };
        let ft = phi(t);
        if ft < fb {
            if t > b {
                a = b;
            } else {
                c = b;
            }
            b = t;
            fb = ft;
        } else if t > b {
            c = t;
        } else {
            a = t;
        }
    }
    if fb < fx {
        (axpy(x, b, d), fb)
    } else {
        (*x, fx)
    }
}

/// Powell's conjugate-direction search.
fn powell(
    f: &mut impl FnMut(&[f64; 6]) -> f64,
    x0: [f64; 6],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> ([f64; 6], f64) {
    let mut dirs: [[f64; 6]; 6] =
        core::array::from_fn(|i| core::array::from_fn(|j| f64::from(u8::from(i == j))));
    let mut x = x0;
    let mut fx = f(&x);
    for _ in 0..max_iter {
        let (x_start, f_start) = (x, fx);
        let (mut best_drop, mut best_dir) = (0.0, 0);
        for (i, d) in dirs.iter().enumerate() {
            let (nx, nf) = line_minimize(f, &x, fx, d, step, tol);
            if fx - nf > best_drop {
                best_drop = fx - nf;
                best_dir = i;
            }
            x = nx;
            fx = nf;
        }
        if f_start - fx <= 1e-7 * (f_start.abs() + fx.abs()) + 1e-12 {
            break;
        }
        let mut d: [f64; 6] = core::array::from_fn(|i| x[i] - x_start[i]);
        let norm = libm::sqrt(d.iter().map(|v| v * v).sum::<f64>());
        if norm > 0.0 {
            d.iter_mut().for_each(|v| *v /= norm);
            let (nx, nf) = line_minimize(f, &x, fx, &d, step, tol);
            x = nx;
            fx = nf;
            dirs[best_dir] = dirs[5];
            dirs[5] = d;
        }
    }
    (x, fx)
}

/// Rigid transform maximizing mutual information between `fixed` and the
/// backward-warped `moving`, over the voxels of `fixed_brain`.
///
/// Searches a 4/2/1 block-mean pyramid with Powell line searches. When
/// nothing beats the identity the identity is returned with
/// [`RegistrationStatus::NotImproved`].
pub fn register_rigid(
    moving: &Volume,
    fixed: &Volume,
    fixed_brain: &LabelMask,
    cfg: &InjectionConfig,
) -> Result<RigidRegistration> {
    cfg.validate()?;
    check_region(fixed.dims(), fixed_brain)?;
    if moving
        .grid()
        .spacing()
        .iter()
        .chain(fixed.grid().spacing().iter())
        .any(|s| !s.is_finite())
    {
        bail!(Argument, "non-finite grid spacing");
    }
    let param = Parameterization::new(fixed.grid());
    let bins = cfg.mi_bins;
    let mut x = [0.0; 6];
    let mut full = None;
    for f in PYRAMID {
        let Some(level) = Level::build(moving, fixed, fixed_brain, f)? else {
            continue;
        };
        let unit = level.factor as f64 * fixed.grid().spacing().iter().sum::<f64>() / 3.0;
        let mut cost = |p: &[f64; 6]| -level.mi(&param.transform(p), bins);
        x = powell(&mut cost, x, 2.0 * unit, 0.02 * unit, 8).0;
        if f == 1 {
            full = Some(level);
        }
    }
    let level = full.expect("full-resolution level always exists");
    let mi_initial = level.mi(&RigidTransform::identity(), bins);
    let candidate = param.transform(&x);
    let mi_final = level.mi(&candidate, bins);
    Ok(if mi_final > mi_initial {
        RigidRegistration {
            transform: candidate,
            mi_initial,
            mi_final,
            status: RegistrationStatus::Improved,
        }
    } else {
        RigidRegistration {
            transform: RigidTransform::identity(),
            mi_initial,
            mi_final: mi_initial,
            status: RegistrationStatus::NotImproved,
        }
    })
}
