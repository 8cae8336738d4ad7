//! Synthetic vertebrae with closed-form landmarks.
//!
//! Shapes are built in a local anatomical frame `(u, v, w)`: u superior,
//! v left, w posterior, with B (posterior center of the body) at the origin.
//! The body is an ellipsoid truncated by two endplates, the pedicles are
//! cylinders running posteriorly, and the arch is a lamina slab with a
//! spinous process. The local frame is mapped onto the volume with u along
//! world z, v along world x and w along world y, then posed.

use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::landmarks::LandmarkSet;
use crate::volume::{Dims, Grid, Volume};
use crate::{Error, Result, Vec3};

/// Ranges sampled by [`PhantomParams::random`], in mm or degrees.
pub mod ranges {
    pub const BODY_LATERAL: (f64, f64) = (18.0, 25.0);
    pub const BODY_AP: (f64, f64) = (13.0, 18.0);
    pub const BODY_HEIGHT: (f64, f64) = (22.0, 30.0);
    /// Lateral distance from the midline to the medial pedicle edge.
    pub const MEDIAL_EDGE: (f64, f64) = (6.0, 14.0);
    pub const PEDICLE_RADIUS: (f64, f64) = (3.0, 5.0);
    pub const PEDICLE_LENGTH: (f64, f64) = (12.0, 18.0);
    pub const LAMINA_THICKNESS: (f64, f64) = (4.0, 6.0);
    pub const SPINOUS_LENGTH: (f64, f64) = (10.0, 18.0);
    pub const POSE_ROTATION_DEG: f64 = 8.0;
    pub const POSE_SHIFT: f64 = 4.0;
    pub const LATERAL_TILT_DEG: f64 = 6.0;
    pub const LR_SKEW: f64 = 0.1;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomParams {
    /// Ellipsoid half-axes `[lateral, anteroposterior, axial]`.
    pub body_half_axes: [f64; 3],
    /// Distance between the endplates; must be below twice the axial half-axis.
    pub body_height: f64,
    pub pedicle_radius: f64,
    pub pedicle_length: f64,
    /// Lateral offset of each pedicle axis from the midline.
    pub pedicle_offset: f64,
    pub lamina_thickness: f64,
    pub spinous_length: f64,
    /// Rotation of the posterior elements about the anteroposterior axis.
    pub lateral_tilt_deg: f64,
    /// Left pedicle offset is scaled by `1 + skew`, right by `1 - skew`.
    pub lr_skew: f64,
    /// Extra pose, XYZ Euler angles in degrees.
    pub rotation_deg: [f64; 3],
    /// Shift of the vertebra from the volume center, mm.
    pub translation_mm: [f64; 3],
    pub bone_hu: f64,
    pub background_hu: f64,
    pub air_hu: f64,
    /// `(sx, sy, sz)`, mm.
    pub spacing: [f64; 3],
    /// `(nz, ny, nx)`.
    pub dims: Dims,
    pub seed: u64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        PhantomParams {
            body_half_axes: [22.0, 15.0, 16.0],
            body_height: 26.0,
            pedicle_radius: 4.0,
            pedicle_length: 15.0,
            pedicle_offset: 14.0,
            lamina_thickness: 5.0,
            spinous_length: 14.0,
            lateral_tilt_deg: 0.0,
            lr_skew: 0.0,
            rotation_deg: [0.0; 3],
            translation_mm: [0.0; 3],
            bone_hu: 400.0,
            background_hu: -100.0,
            air_hu: -1000.0,
            spacing: [1.0; 3],
            dims: [72, 128, 128],
            seed: 0,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.gen_range(lo..hi)
}

fn symmetric(rng: &mut ChaCha8Rng, half: f64) -> f64 {
    rng.gen_range(-half..half)
}

impl PhantomParams {
    /// Anatomy and pose drawn from [`ranges`]; everything else default.
    pub fn random(seed: u64) -> Self {
        use ranges::*;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body_height = uniform(&mut rng, BODY_HEIGHT);
        let axial = body_height / 2.0 / rng.gen_range(0.8..0.9);
        let pedicle_radius = uniform(&mut rng, PEDICLE_RADIUS);
        let medial = uniform(&mut rng, MEDIAL_EDGE);
        PhantomParams {
            body_half_axes: [
                uniform(&mut rng, BODY_LATERAL),
                uniform(&mut rng, BODY_AP),
                axial,
            ],
            body_height,
            pedicle_radius,
            pedicle_length: uniform(&mut rng, PEDICLE_LENGTH),
            pedicle_offset: medial + pedicle_radius,
            lamina_thickness: uniform(&mut rng, LAMINA_THICKNESS),
            spinous_length: uniform(&mut rng, SPINOUS_LENGTH),
            lateral_tilt_deg: symmetric(&mut rng, LATERAL_TILT_DEG),
            lr_skew: symmetric(&mut rng, LR_SKEW),
            rotation_deg: [(); 3].map(|_| symmetric(&mut rng, POSE_ROTATION_DEG)),
            translation_mm: [(); 3].map(|_| symmetric(&mut rng, POSE_SHIFT)),
            seed,
            ..PhantomParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("phantom {what}")));
        let lengths = [
            self.body_half_axes[0],
            self.body_half_axes[1],
            self.body_half_axes[2],
            self.body_height,
            self.pedicle_radius,
            self.pedicle_length,
            self.pedicle_offset,
            self.lamina_thickness,
            self.spinous_length,
        ];
        if !lengths.iter().all(|l| l.is_finite() && *l > 0.0) {
            return bad("lengths must be positive");
        }
        if self.body_height >= 2.0 * self.body_half_axes[2] {
            return bad("body height must be below twice the axial half-axis");
        }
        if self.pedicle_radius >= self.body_height / 2.0 {
            return bad("pedicle radius must be below half the body height");
        }
        if !(self.lr_skew.abs() < 1.0) {
            return bad("skew must lie in (-1, 1)");
        }
        let (left, right) = self.pedicle_offsets();
        if left <= self.pedicle_radius || right <= self.pedicle_radius {
            return bad("pedicles must not cross the midline");
        }
        if !(self.lateral_tilt_deg.abs() < 45.0) {
            return bad("lateral tilt must be below 45 degrees");
        }
        if self.dims.iter().any(|&d| d < 16) {
            return bad("dims must be at least 16 per axis");
        }
        if !self.spacing.iter().all(|s| s.is_finite() && *s > 0.0) {
            return bad("spacing must be positive");
        }
        let hu = [self.bone_hu, self.background_hu, self.air_hu];
        if !hu.iter().all(|v| v.is_finite()) || self.bone_hu <= self.background_hu {
            return bad("intensities must be finite with bone above background");
        }
        if !self.rotation_deg.iter().chain(&self.translation_mm).all(|v| v.is_finite()) {
            return bad("pose must be finite");
        }
        Ok(())
    }

    fn pedicle_offsets(&self) -> (f64, f64) {
        (
            self.pedicle_offset * (1.0 + self.lr_skew),
            self.pedicle_offset * (1.0 - self.lr_skew),
        )
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(
            self.dims,
            Vec3::new(self.spacing[0], self.spacing[1], self.spacing[2]),
            Vec3::zeros(),
        )
    }
}

/// Analytic shape description in local coordinates.
struct Anatomy {
    p: PhantomParams,
    /// Local → world.
    rotation: Rotation3<f64>,
    translation: Vec3,
    /// Rotation of the posterior elements within the local u-v plane.
    tilt: Rotation3<f64>,
}

impl Anatomy {
    fn new(p: &PhantomParams) -> Result<Self> {
        p.validate()?;
        // Columns: u → world z, v → world x, w → world y.
        let base = Rotation3::from_matrix_unchecked(nalgebra::Matrix3::new(
            0.0, 1.0, 0.0, //
            0.0, 0.0, 1.0, //
            1.0, 0.0, 0.0,
        ));
        let [rx, ry, rz] = p.rotation_deg.map(f64::to_radians);
        let rotation = Rotation3::from_euler_angles(rx, ry, rz) * base;
        let tilt = Rotation3::from_axis_angle(
            &Unit::new_unchecked(Vec3::z()),
            p.lateral_tilt_deg.to_radians(),
        );
        let grid = p.grid()?;
        let center = grid.voxel_to_world(p.dims.map(|d| (d - 1) as f64 / 2.0));
        let ap = p.body_half_axes[1];
        let back = p.pedicle_length + p.lamina_thickness + p.spinous_length;
        let local_center = Vec3::new(0.0, 0.0, (back - 2.0 * ap) / 2.0);
        let translation = center - rotation * local_center + Vec3::from(p.translation_mm);
        Ok(Anatomy {
            p: p.clone(),
            rotation,
            translation,
            tilt,
        })
    }

    fn to_world(&self, local: Vec3) -> Vec3 {
        self.rotation * local + self.translation
    }

    fn to_local(&self, world: Vec3) -> Vec3 {
        self.rotation.inverse() * (world - self.translation)
    }

    /// Posterior-element point, tilted. Local vectors are `(u, v, w)`.
    fn posterior(&self, u: f64, v: f64, w: f64) -> Vec3 {
        self.tilt * Vec3::new(u, v, w)
    }

    fn landmarks_local(&self) -> [Vec3; 7] {
        let p = &self.p;
        let [_, ap, axial] = p.body_half_axes;
        let r = p.pedicle_radius;
        let mid = p.pedicle_length / 2.0;
        let (left, right) = p.pedicle_offsets();
        let half_h = p.body_height / 2.0;
        let g_w = -ap + ap * (1.0 - (half_h / axial).powi(2)).sqrt();
        [
            Vec3::new(0.0, 0.0, -2.0 * ap),
            Vec3::zeros(),
            self.posterior(0.0, left - r, mid),
            self.posterior(-r, left, mid),
            self.posterior(-r, -right, mid),
            self.posterior(0.0, -(right - r), mid),
            Vec3::new(-half_h, 0.0, g_w),
        ]
    }

    fn contains(&self, q: Vec3) -> bool {
        let p = &self.p;
        let [lat, ap, axial] = p.body_half_axes;
        let (u, v, w) = (q.x, q.y, q.z);
        if u.abs() <= p.body_height / 2.0 {
            let e = (u / axial).powi(2) + (v / lat).powi(2) + ((w + ap) / ap).powi(2);
            if e <= 1.0 {
                return true;
            }
        }
        // Posterior elements live in the tilted frame.
        let t = self.tilt.inverse() * q;
        let (u, v, w) = (t.x, t.y, t.z);
        let r = p.pedicle_radius;
        let (left, right) = p.pedicle_offsets();
        let len = p.pedicle_length;
        if (-0.3 * ap..=len).contains(&w) {
            for off in [left, -right] {
                if u * u + (v - off) * (v - off) <= r * r {
                    return true;
                }
            }
        }
        let lamina_end = len + p.lamina_thickness;
        if (len..=lamina_end).contains(&w) && u.abs() <= r && (-right - r..=left + r).contains(&v) {
            return true;
        }
        (lamina_end..=lamina_end + p.spinous_length).contains(&w)
            && v.abs() <= 2.5
            && u.abs() <= 1.2 * r
    }
}

/// Closed-form landmarks for `p`, without rasterizing.
pub fn phantom_landmarks(p: &PhantomParams) -> Result<LandmarkSet> {
    let anatomy = Anatomy::new(p)?;
    landmarks_in_grid(&anatomy, &p.grid()?)
}

fn landmarks_in_grid(anatomy: &Anatomy, grid: &Grid) -> Result<LandmarkSet> {
    let pts = anatomy.landmarks_local().map(|q| anatomy.to_world(q));
    let lm = LandmarkSet::new(pts)?;
    let dims = grid.dims();
    for (name, pt) in lm.iter() {
        let v = grid.world_to_voxel(pt);
        let inside = (0..3).all(|a| v[a] >= 0.0 && v[a] <= (dims[a] - 1) as f64);
        if !inside {
            return Err(Error::PhantomOutOfBounds(format!(
                "landmark {name} at voxel {v:?} lies outside {dims:?}"
            )));
        }
    }
    Ok(lm)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub volume: Volume,
    pub landmarks: LandmarkSet,
}

pub fn generate_phantom(p: &PhantomParams) -> Result<Phantom> {
    let anatomy = Anatomy::new(p)?;
    let grid = p.grid()?;
    let landmarks = landmarks_in_grid(&anatomy, &grid)?;
    let [nz, ny, nx] = grid.dims();
    let ext = grid.voxel_to_world([(nz - 1) as f64, (ny - 1) as f64, (nx - 1) as f64]);
    let (cx, cy) = (ext.x / 2.0, ext.y / 2.0);
    let (rx, ry) = (0.47 * ext.x, 0.47 * ext.y);
    let mut voxels = vec![0.0f32; grid.len()];
    voxels
        .par_chunks_mut(ny * nx)
        .enumerate()
        .for_each(|(z, slice)| {
            for y in 0..ny {
                for x in 0..nx {
                    let world = grid.voxel_to_world([z as f64, y as f64, x as f64]);
                    let v = if anatomy.contains(anatomy.to_local(world)) {
                        p.bone_hu
                    } else if ((world.x - cx) / rx).powi(2) + ((world.y - cy) / ry).powi(2) <= 1.0 {
                        p.background_hu
                    } else {
                        p.air_hu
                    };
                    slice[y * nx + x] = v as f32;
                }
            }
        });
    Ok(Phantom {
        volume: Volume::new(grid, voxels)?,
        landmarks,
    })
}

/// Adds `N(0, sigma_hu²)` to every voxel; `sigma_hu = 0` returns the input.
pub fn add_noise(vol: &Volume, sigma_hu: f64, seed: u64) -> Result<Volume> {
    if !(sigma_hu.is_finite() && sigma_hu >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma {sigma_hu}")));
    }
    if sigma_hu == 0.0 {
        return Ok(vol.clone());
    }
    let normal = Normal::new(0.0, sigma_hu).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let voxels = vol
        .voxels()
        .iter()
        .map(|&v| (v as f64 + normal.sample(&mut rng)) as f32)
        .collect();
    Volume::new(vol.grid().clone(), voxels)
}

/// Adds `N(0, sigma_mm²)` to every landmark coordinate.
pub fn jitter_landmarks(lm: &LandmarkSet, sigma_mm: f64, seed: u64) -> Result<LandmarkSet> {
    if !(sigma_mm.is_finite() && sigma_mm >= 0.0) {
        return Err(Error::InvalidParameter(format!("jitter sigma {sigma_mm}")));
    }
    if sigma_mm == 0.0 {
        return Ok(lm.clone());
    }
    let normal = Normal::new(0.0, sigma_mm).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lm.map(|_, p| p + Vec3::from_fn(|_, _| normal.sample(&mut rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::fit_frame_detailed;
    use crate::Landmark;

    fn small() -> PhantomParams {
        PhantomParams {
            dims: [40, 96, 96],
            ..PhantomParams::default()
        }
    }

    #[test]
    fn deterministic() {
        let p = PhantomParams { dims: [40, 96, 96], ..PhantomParams::random(4) };
        let a = generate_phantom(&p).unwrap();
        let b = generate_phantom(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(phantom_landmarks(&p).unwrap(), a.landmarks);
    }

    #[test]
    fn symmetric_pedicles_mirror() {
        let p = PhantomParams { rotation_deg: [3.0, -5.0, 7.0], translation_mm: [1.0, 2.0, -1.5], ..small() };
        let lm = phantom_landmarks(&p).unwrap();
        let anatomy = Anatomy::new(&p).unwrap();
        let normal = anatomy.rotation * Vec3::y();
        let b = lm.get(Landmark::B);
        let mirror = |q: Vec3| q - normal * (2.0 * (q - b).dot(&normal));
        assert!((mirror(lm.get(Landmark::C)) - lm.get(Landmark::F)).norm() < 1e-6);
        assert!((mirror(lm.get(Landmark::D)) - lm.get(Landmark::E)).norm() < 1e-6);
    }

    #[test]
    fn landmarks_sit_on_bone_surfaces() {
        let ph = generate_phantom(&small()).unwrap();
        let fit = fit_frame_detailed(&ph.landmarks).unwrap();
        // Default pose: frame axes align with world z, x, y.
        assert!((fit.frame.x - Vec3::z()).norm() < 1e-12);
        assert!((fit.frame.y - Vec3::x()).norm() < 1e-12);
        assert!((fit.frame.z - Vec3::y()).norm() < 1e-12);
        // Medial edge of the left pedicle is 10 mm from the midline.
        assert!((fit.frame.to_frame(fit.c()).y - 10.0).abs() < 1e-12);
    }

    #[test]
    fn intensities_span_the_window() {
        let ph = generate_phantom(&small()).unwrap();
        let (lo, hi) = ph.volume.min_max();
        assert!(lo < -200.0 && hi > 200.0);
        let bone = ph.volume.voxels().iter().filter(|&&v| v == 400.0).count();
        assert!(bone > 1000, "only {bone} bone voxels");
    }

    #[test]
    fn out_of_bounds_landmarks() {
        let p = PhantomParams { translation_mm: [0.0, 0.0, 30.0], ..small() };
        assert!(matches!(generate_phantom(&p), Err(Error::PhantomOutOfBounds(_))));
    }

    #[test]
    fn invalid_params() {
        let p = PhantomParams { bone_hu: -500.0, ..small() };
        assert!(matches!(generate_phantom(&p), Err(Error::InvalidParameter(_))));
        let p = PhantomParams { dims: [8, 96, 96], ..small() };
        assert!(generate_phantom(&p).is_err());
        let p = PhantomParams { pedicle_radius: -1.0, ..small() };
        assert!(phantom_landmarks(&p).is_err());
    }

    #[test]
    fn noise_and_jitter() {
        let ph = generate_phantom(&small()).unwrap();
        assert_eq!(add_noise(&ph.volume, 0.0, 1).unwrap(), ph.volume);
        assert_eq!(jitter_landmarks(&ph.landmarks, 0.0, 1).unwrap(), ph.landmarks);
        let a = add_noise(&ph.volume, 20.0, 1).unwrap();
        assert_eq!(a, add_noise(&ph.volume, 20.0, 1).unwrap());
        assert_ne!(a, add_noise(&ph.volume, 20.0, 2).unwrap());
        let j = jitter_landmarks(&ph.landmarks, 0.65, 1).unwrap();
        assert_ne!(j, jitter_landmarks(&ph.landmarks, 0.65, 2).unwrap());
        assert!(add_noise(&ph.volume, -1.0, 1).is_err());
    }

    #[test]
    fn params_json_defaults() {
        let p: PhantomParams = serde_json::from_str(r#"{"seed": 9, "lr_skew": 0.05}"#).unwrap();
        assert_eq!(p.seed, 9);
        assert_eq!(p.dims, [72, 128, 128]);
        assert!(serde_json::from_str::<PhantomParams>(r#"{"bogus": 1}"#).is_err());
    }
}
