use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::linalg::{
    linear_part, mat3_det, mat3_mul, mat3_transpose, mat4_mul, transform_point, Mat3, Mat4, Vec3,
    IDENTITY4,
};
use crate::volume::{mapped_coords, sample_nearest, sample_trilinear, GridSpec, LabelMask, Volume};

/// A 6-DOF rigid map of world space, held as a 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat4", into = "Mat4")]
pub struct RigidTransform {
    matrix: Mat4,
}

fn rotation_zyx(angles: Vec3) -> Mat3 {
    let (sx, cx) = libm::sincos(angles[0]);
    let (sy, cy) = libm::sincos(angles[1]);
    let (sz, cz) = libm::sincos(angles[2]);
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    mat3_mul(&rz, &mat3_mul(&ry, &rx))
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { matrix: IDENTITY4 }
    }

    /// `p -> R (p - center) + center + translation` with `R = Rz Ry Rx`;
    /// `angles` are the rotations about x, y, z in radians.
    pub fn from_euler_zyx(angles: Vec3, translation: Vec3, center: Vec3) -> Self {
        let r = rotation_zyx(angles);
        let rc = crate::linalg::mat3_vec(&r, center);
        let mut m = IDENTITY4;
        for i in 0..3 {
            m[i][..3].copy_from_slice(&r[i]);
            m[i][3] = center[i] - rc[i] + translation[i];
        }
        Self { matrix: m }
    }

    pub fn translation(t: Vec3) -> Self {
        Self::from_euler_zyx([0.0; 3], t, [0.0; 3])
    }

    /// Validates that `matrix` is rigid within 1e-6.
    pub fn from_matrix(matrix: Mat4) -> Result<Self> {
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            bail!(Argument, "transform has non-finite entries");
        }
        if matrix[3] != [0.0, 0.0, 0.0, 1.0] {
            bail!(Argument, "transform bottom row must be (0, 0, 0, 1)");
        }
        let r = linear_part(&matrix);
        let rtr = mat3_mul(&mat3_transpose(&r), &r);
        for (i, row) in rtr.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                if (v - e).abs() > 1e-6 {
                    bail!(Argument, "transform rotation block is not orthonormal");
                }
            }
        }
        if (mat3_det(&r) - 1.0).abs() > 1e-6 {
            bail!(
                Argument,
                "transform rotation block is not a proper rotation"
            );
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }

    pub fn rotation(&self) -> Mat3 {
        linear_part(&self.matrix)
    }

    /// Translation column of the matrix.
    pub fn offset(&self) -> Vec3 {
        [self.matrix[0][3], self.matrix[1][3], self.matrix[2][3]]
    }

    /// Rotation angle of the rotation block, in radians.
    pub fn rotation_angle(&self) -> f64 {
        let r = self.rotation();
        let c = ((r[0][0] + r[1][1] + r[2][2] - 1.0) / 2.0).clamp(-1.0, 1.0);
        libm::acos(c)
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation();
        let rt = mat3_transpose(&r);
        let t = crate::linalg::mat3_vec(&rt, self.offset());
        let mut m = IDENTITY4;
        for i in 0..3 {
            m[i][..3].copy_from_slice(&rt[i]);
            m[i][3] = -t[i];
        }
        Self { matrix: m }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            matrix: mat4_mul(&self.matrix, &other.matrix),
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        transform_point(&self.matrix, p)
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl TryFrom<Mat4> for RigidTransform {
    type Error = crate::Error;
    fn try_from(m: Mat4) -> Result<Self> {
        Self::from_matrix(m)
    }
}

impl From<RigidTransform> for Mat4 {
    fn from(t: RigidTransform) -> Self {
        t.matrix
    }
}

/// Resamples `vol` onto `target` so that `out(x) = vol(A⁻¹ x)` in world
/// space (trilinear, fill 0).
pub fn apply_rigid(vol: &Volume, a: &RigidTransform, target: &GridSpec) -> Volume {
    let inv = a.inverse().matrix;
    let data: Vec<f32> = mapped_coords(vol.grid(), &inv, target)
        .map(|p| sample_trilinear(vol, p) as f32)
        .collect();
    Volume::new(target.clone(), data).expect("finite samples")
}

/// Nearest-neighbour counterpart of [`apply_rigid`] for labels.
pub fn apply_rigid_mask(mask: &LabelMask, a: &RigidTransform, target: &GridSpec) -> LabelMask {
    let inv = a.inverse().matrix;
    let data: Vec<u8> = mapped_coords(mask.grid(), &inv, target)
        .map(|p| sample_nearest(mask, p))
        .collect();
    LabelMask::new(target.clone(), data).expect("target length matches")
}
