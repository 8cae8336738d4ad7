//! Voxel grids: windowing, cropping, resampling and voxel/world transforms.
//!
//! Index-space quantities (dims, bounding boxes, fractional voxel
//! coordinates) are ordered `(z, y, x)`. World-space quantities (spacing,
//! origin, points) are ordered `(x, y, z)` in millimeters. Voxels are stored
//! z-major with x fastest.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::landmarks::LandmarkSet;
use crate::{Error, Result, Vec3};

/// Voxel counts `(nz, ny, nx)`.
pub type Dims = [usize; 3];

/// Fractional voxel coordinates `(z, y, x)`.
pub type VoxelCoord = [f64; 3];

/// Default intensity window, in HU.
pub const DEFAULT_W_MIN: f64 = -200.0;
pub const DEFAULT_W_MAX: f64 = 600.0;

/// Network input size `(nz, ny, nx)`.
pub const DEFAULT_TARGET_DIMS: Dims = [72, 128, 128];

/// Placement of a voxel grid in world space.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dims: Dims,
    spacing: Vec3,
    origin: Vec3,
}

impl Grid {
    pub fn new(dims: Dims, spacing: Vec3, origin: Vec3) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGrid(format!("dims {dims:?} must all be >= 1")));
        }
        if dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).is_none() {
            return Err(Error::InvalidGrid(format!("dims {dims:?} overflow")));
        }
        if !spacing.iter().all(|&s| s.is_finite() && s > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "spacing {:?} must be positive",
                spacing.as_slice()
            )));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Grid {
            dims,
            spacing,
            origin,
        })
    }

    /// Unit-spaced grid with its first voxel at the world origin.
    pub fn unit(dims: Dims) -> Result<Self> {
        Grid::new(dims, Vec3::repeat(1.0), Vec3::zeros())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[2] + x
    }

    /// Inverse of [`Grid::index`].
    pub fn unravel(&self, i: usize) -> [usize; 3] {
        let x = i % self.dims[2];
        let y = (i / self.dims[2]) % self.dims[1];
        let z = i / (self.dims[2] * self.dims[1]);
        [z, y, x]
    }

    pub fn voxel_to_world(&self, idx: VoxelCoord) -> Vec3 {
        Vec3::new(
            self.origin.x + idx[2] * self.spacing.x,
            self.origin.y + idx[1] * self.spacing.y,
            self.origin.z + idx[0] * self.spacing.z,
        )
    }

    pub fn world_to_voxel(&self, p: Vec3) -> VoxelCoord {
        [
            (p.z - self.origin.z) / self.spacing.z,
            (p.y - self.origin.y) / self.spacing.y,
            (p.x - self.origin.x) / self.spacing.x,
        ]
    }

    /// Physical size `n * spacing` per world axis `(x, y, z)`.
    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.dims[2] as f64 * self.spacing.x,
            self.dims[1] as f64 * self.spacing.y,
            self.dims[0] as f64 * self.spacing.z,
        )
    }
}

/// Inclusive voxel-index box `lo..=hi`, `(z, y, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl BoundingBox {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| lo[a] > hi[a]) {
            return Err(Error::OutOfBounds(format!("lo {lo:?} exceeds hi {hi:?}")));
        }
        Ok(BoundingBox { lo, hi })
    }

    pub fn full(dims: Dims) -> Self {
        BoundingBox {
            lo: [0; 3],
            hi: [dims[0] - 1, dims[1] - 1, dims[2] - 1],
        }
    }

    pub fn dims(&self) -> Dims {
        [
            self.hi[0] - self.lo[0] + 1,
            self.hi[1] - self.lo[1] + 1,
            self.hi[2] - self.lo[2] + 1,
        ]
    }

    fn check_within(&self, dims: Dims) -> Result<()> {
        if (0..3).any(|a| self.lo[a] > self.hi[a]) {
            return Err(Error::OutOfBounds(format!(
                "lo {:?} exceeds hi {:?}",
                self.lo, self.hi
            )));
        }
        if (0..3).any(|a| self.hi[a] >= dims[a]) {
            return Err(Error::OutOfBounds(format!(
                "box hi {:?} outside dims {dims:?}",
                self.hi
            )));
        }
        Ok(())
    }
}

/// A scalar voxel field placed in world space.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    grid: Grid,
    voxels: Vec<f32>,
}

impl Volume {
    pub fn new(grid: Grid, voxels: Vec<f32>) -> Result<Self> {
        if voxels.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} voxels for dims {:?} ({} expected)",
                voxels.len(),
                grid.dims,
                grid.len()
            )));
        }
        if let Some(i) = voxels.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "non-finite voxel at {:?}",
                grid.unravel(i)
            )));
        }
        Ok(Volume { grid, voxels })
    }

    pub fn filled(grid: Grid, value: f32) -> Self {
        let n = grid.len();
        Volume {
            grid,
            voxels: vec![value; n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> Dims {
        self.grid.dims
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    pub fn into_voxels(self) -> Vec<f32> {
        self.voxels
    }

    pub fn get(&self, z: usize, y: usize, x: usize) -> f32 {
        self.voxels[self.grid.index(z, y, x)]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.voxels
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn voxel_to_world(&self, idx: VoxelCoord) -> Vec3 {
        self.grid.voxel_to_world(idx)
    }

    pub fn world_to_voxel(&self, p: Vec3) -> VoxelCoord {
        self.grid.world_to_voxel(p)
    }
}

/// Clamp-and-ramp intensity window onto `[0, 1]`.
pub fn window_value(v: f64, w_min: f64, w_max: f64) -> f64 {
    if v <= w_min {
        0.0
    } else if v >= w_max {
        1.0
    } else {
        (v - w_min) / (w_max - w_min)
    }
}

pub fn apply_window(vol: &Volume, w_min: f64, w_max: f64) -> Result<Volume> {
    if !(w_min.is_finite() && w_max.is_finite() && w_min < w_max) {
        return Err(Error::InvalidWindow { w_min, w_max });
    }
    let voxels = vol
        .voxels
        .par_iter()
        .map(|&v| window_value(v as f64, w_min, w_max) as f32)
        .collect();
    Ok(Volume {
        grid: vol.grid.clone(),
        voxels,
    })
}

pub fn crop(vol: &Volume, bbox: &BoundingBox) -> Result<Volume> {
    bbox.check_within(vol.dims())?;
    let [nz, ny, nx] = bbox.dims();
    let [z0, y0, x0] = bbox.lo;
    let mut voxels = Vec::with_capacity(nz * ny * nx);
    for z in z0..z0 + nz {
        for y in y0..y0 + ny {
            let start = vol.grid.index(z, y, x0);
            voxels.extend_from_slice(&vol.voxels[start..start + nx]);
        }
    }
    let origin = vol
        .grid
        .voxel_to_world([z0 as f64, y0 as f64, x0 as f64]);
    let grid = Grid::new([nz, ny, nx], vol.grid.spacing, origin)?;
    Ok(Volume { grid, voxels })
}

/// Sampling positions along one axis: output voxel `j` reads source
/// coordinate `j * n_src / n_dst`, clamped into the source grid.
fn axis_taps(n_src: usize, n_dst: usize) -> Vec<(usize, usize, f64)> {
    let ratio = n_src as f64 / n_dst as f64;
    let last = (n_src - 1) as f64;
    (0..n_dst)
        .map(|j| {
            let c = (j as f64 * ratio).min(last);
            let i0 = c.floor() as usize;
            let i1 = (i0 + 1).min(n_src - 1);
            (i0, i1, c - i0 as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (1.0 - t) * a + t * b
}

/// Trilinear resampling onto `target` dims over the same physical extent.
///
/// Voxel 0 stays at the same world position; spacing is scaled by
/// `n_src / n_dst` per axis.
pub fn resample(vol: &Volume, target: Dims) -> Result<Volume> {
    if target.contains(&0) {
        return Err(Error::InvalidGrid(format!(
            "target dims {target:?} must all be >= 1"
        )));
    }
    let src = &vol.grid;
    let [sz, sy, sx] = src.dims;
    let tz = axis_taps(sz, target[0]);
    let ty = axis_taps(sy, target[1]);
    let tx = axis_taps(sx, target[2]);
    let plane = target[1] * target[2];
    let mut voxels = vec![0.0f32; target.iter().product()];
    voxels
        .par_chunks_mut(plane)
        .zip(tz.par_iter())
        .for_each(|(out, &(z0, z1, fz))| {
            for (y, &(y0, y1, fy)) in ty.iter().enumerate() {
                for (x, &(x0, x1, fx)) in tx.iter().enumerate() {
                    let v = |z, y, x| vol.voxels[src.index(z, y, x)] as f64;
                    let c00 = lerp(v(z0, y0, x0), v(z0, y0, x1), fx);
                    let c01 = lerp(v(z0, y1, x0), v(z0, y1, x1), fx);
                    let c10 = lerp(v(z1, y0, x0), v(z1, y0, x1), fx);
                    let c11 = lerp(v(z1, y1, x0), v(z1, y1, x1), fx);
                    let c0 = lerp(c00, c01, fy);
                    let c1 = lerp(c10, c11, fy);
                    out[y * target[2] + x] = lerp(c0, c1, fz) as f32;
                }
            }
        });
    let spacing = Vec3::new(
        src.spacing.x * sx as f64 / target[2] as f64,
        src.spacing.y * sy as f64 / target[1] as f64,
        src.spacing.z * sz as f64 / target[0] as f64,
    );
    let grid = Grid::new(target, spacing, src.origin)?;
    Ok(Volume { grid, voxels })
}

/// Carries landmarks from `src` onto `dst`, a grid covering the same physical
/// region at a different resolution. Each point's fractional voxel position
/// is scaled by `n_dst / n_src` per axis.
pub fn map_landmarks(lm: &LandmarkSet, src: &Grid, dst: &Grid) -> Result<LandmarkSet> {
    let (es, ed) = (src.extent(), dst.extent());
    for a in 0..3 {
        let rel = (es[a] - ed[a]).abs() / es[a].max(ed[a]);
        if rel > 1e-6 {
            return Err(Error::ExtentMismatch(format!(
                "axis {a}: {} mm vs {} mm",
                es[a], ed[a]
            )));
        }
        if (src.origin[a] - dst.origin[a]).abs() > 1e-6 * es[a] {
            return Err(Error::ExtentMismatch(format!(
                "axis {a}: origins {} mm vs {} mm",
                src.origin[a], dst.origin[a]
            )));
        }
    }
    let scale = [
        dst.dims[0] as f64 / src.dims[0] as f64,
        dst.dims[1] as f64 / src.dims[1] as f64,
        dst.dims[2] as f64 / src.dims[2] as f64,
    ];
    lm.map(|_, p| {
        let v = src.world_to_voxel(p);
        dst.voxel_to_world([v[0] * scale[0], v[1] * scale[1], v[2] * scale[2]])
    })
}
