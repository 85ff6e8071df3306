use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::linalg::{affine_inverse, dot3, norm3, transform_point, Mat4, Vec3, IDENTITY4};

/// Tolerance on the cosine between direction columns.
const ORTHOGONALITY_TOL: f64 = 1e-4;

/// Voxel lattice geometry: dimensions plus the voxel-to-world affine.
///
/// The affine's linear block must have orthogonal columns; their norms
/// are the voxel spacing in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    dims: [usize; 3],
    affine: Mat4,
    inverse: Mat4,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    dims: [usize; 3],
    affine: Mat4,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;
    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(raw.dims, raw.affine)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid {
            dims: g.dims,
            affine: g.affine,
        }
    }
}

impl GridSpec {
    pub fn new(dims: [usize; 3], affine: Mat4) -> Result<Self> {
        if dims.contains(&0) {
            bail!(Argument, "grid dims must be positive, got {dims:?}");
        }
        if affine.iter().flatten().any(|v| !v.is_finite()) {
            bail!(Argument, "grid affine has non-finite entries");
        }
        if affine[3] != [0.0, 0.0, 0.0, 1.0] {
            bail!(Argument, "grid affine bottom row must be (0, 0, 0, 1)");
        }
        let cols: [Vec3; 3] = core::array::from_fn(|j| [affine[0][j], affine[1][j], affine[2][j]]);
        let norms = cols.map(norm3);
        if norms.iter().any(|n| *n <= 0.0) {
            bail!(
                Argument,
                "grid spacing must be strictly positive, got {norms:?}"
            );
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                let cos = dot3(cols[i], cols[j]) / (norms[i] * norms[j]);
                if cos.abs() > ORTHOGONALITY_TOL {
                    bail!(
                        Argument,
                        "grid direction columns {i} and {j} are not orthogonal"
                    );
                }
            }
        }
        let inverse = affine_inverse(&affine)
            .ok_or_else(|| Error::Argument("grid affine is singular".into()))?;
        Ok(Self {
            dims,
            affine,
            inverse,
        })
    }

    /// Axis-aligned grid with the given spacing and the origin at voxel 0.
    pub fn with_spacing(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let mut affine = IDENTITY4;
        for (k, s) in spacing.iter().enumerate() {
            affine[k][k] = *s;
        }
        Self::new(dims, affine)
    }

    /// Axis-aligned 1 mm grid with the origin at voxel 0.
    ///
    /// # Panics
    /// If any dimension is zero.
    pub fn unit(dims: [usize; 3]) -> Self {
        Self::new(dims, IDENTITY4).expect("unit grid requires positive dims")
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn affine(&self) -> &Mat4 {
        &self.affine
    }

    pub fn inverse_affine(&self) -> &Mat4 {
        &self.inverse
    }

    pub fn spacing(&self) -> [f64; 3] {
        core::array::from_fn(|j| norm3([self.affine[0][j], self.affine[1][j], self.affine[2][j]]))
    }

    pub fn origin(&self) -> Vec3 {
        [self.affine[0][3], self.affine[1][3], self.affine[2][3]]
    }

    /// Unit direction cosines, one column per voxel axis.
    pub fn direction(&self) -> [[f64; 3]; 3] {
        let sp = self.spacing();
        core::array::from_fn(|i| core::array::from_fn(|j| self.affine[i][j] / sp[j]))
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    #[inline]
    pub fn voxel_to_world(&self, p: Vec3) -> Vec3 {
        transform_point(&self.affine, p)
    }

    #[inline]
    pub fn world_to_voxel(&self, p: Vec3) -> Vec3 {
        transform_point(&self.inverse, p)
    }

    /// World position of the geometric center of the lattice.
    pub fn center_world(&self) -> Vec3 {
        self.voxel_to_world(self.dims.map(|d| (d as f64 - 1.0) / 2.0))
    }

    /// True when dims match and affines agree within `tol`.
    pub fn same_geometry(&self, other: &GridSpec, tol: f64) -> bool {
        self.dims == other.dims
            && self
                .affine
                .iter()
                .flatten()
                .zip(other.affine.iter().flatten())
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Grid covering the same physical extent with isotropic `spacing`.
    ///
    /// Keeps the origin and direction; dims are chosen so the last sample
    /// stays inside the original support.
    pub fn resampled_isotropic(&self, spacing: f64) -> Result<Self> {
        if spacing <= 0.0 || !spacing.is_finite() {
            bail!(Argument, "target spacing must be positive, got {spacing}");
        }
        let sp = self.spacing();
        let dims: [usize; 3] = core::array::from_fn(|k| {
            let extent = (self.dims[k] as f64 - 1.0) * sp[k];
            libm::floor(extent / spacing + 1e-9) as usize + 1
        });
        let dir = self.direction();
        let mut affine = IDENTITY4;
        for i in 0..3 {
            for j in 0..3 {
                affine[i][j] = dir[i][j] * spacing;
            }
            affine[i][3] = self.affine[i][3];
        }
        Self::new(dims, affine)
    }

    /// Grid with each axis subsampled by `factor`, each new voxel centered on
    /// its `factor`³ block of the original.
    pub fn downsampled(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            bail!(Argument, "downsample factor must be positive");
        }
        let dims = self.dims.map(|d| (d / factor).max(1));
        let offset = (factor as f64 - 1.0) / 2.0;
        let origin = self.voxel_to_world([offset; 3]);
        let mut affine = self.affine;
        for row in affine.iter_mut().take(3) {
            for cell in row.iter_mut().take(3) {
                *cell *= factor as f64;
            }
        }
        for (i, o) in origin.iter().enumerate() {
            affine[i][3] = *o;
        }
        Self::new(dims, affine)
    }
}
