//! Personalized vertebral coordinate frame and cutting-plane generation.
//!
//! The frame has its origin at B. Z runs from A to B (posterior), Y from the
//! right pedicle midpoint towards the left one, and X = Y × Z (superior).
//! Pedicle points C, D, E, F are first projected onto the plane through B
//! normal to Z.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::landmarks::{Landmark, LandmarkSet};
use crate::{Error, Result, Vec3};

/// Longitudinal planes sit at this fraction of the medial pedicle edge offset.
pub const LONGITUDINAL_FRACTION: f64 = 0.75;
/// The transverse plane sits this fraction of the way from J towards G.
pub const TRANSVERSE_FRACTION: f64 = 0.4;

const MIN_AXIS_MM: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(with = "crate::json::vec3")]
    pub origin: Vec3,
    #[serde(rename = "X", with = "crate::json::vec3")]
    pub x: Vec3,
    #[serde(rename = "Y", with = "crate::json::vec3")]
    pub y: Vec3,
    #[serde(rename = "Z", with = "crate::json::vec3")]
    pub z: Vec3,
}

impl Frame {
    /// World point to frame coordinates `(x, y, z)`.
    pub fn to_frame(&self, p: Vec3) -> Vec3 {
        let d = p - self.origin;
        Vec3::new(self.x.dot(&d), self.y.dot(&d), self.z.dot(&d))
    }

    pub fn from_frame(&self, c: Vec3) -> Vec3 {
        self.origin + self.x * c.x + self.y * c.y + self.z * c.z
    }

    /// Largest deviation from an orthonormal right-handed basis.
    pub fn orthonormality_error(&self) -> f64 {
        let units = [self.x, self.y, self.z].map(|a| (a.norm() - 1.0).abs());
        let dots = [self.x.dot(&self.y), self.y.dot(&self.z), self.z.dot(&self.x)].map(f64::abs);
        let det = (self.x.cross(&self.y).dot(&self.z) - 1.0).abs();
        units.into_iter().chain(dots).chain([det]).fold(0.0, f64::max)
    }
}

/// Projection of `p` onto the plane through `origin` with unit `normal`.
///
/// Normals within 1e-3 of unit length are renormalized; others are rejected.
pub fn project_onto_plane(p: Vec3, origin: Vec3, normal: Vec3) -> Result<Vec3> {
    let len = normal.norm();
    let n = if (len - 1.0).abs() <= 1e-6 {
        normal
    } else if (len - 1.0).abs() <= 1e-3 {
        normal / len
    } else {
        return Err(Error::NonUnitNormal(len));
    };
    Ok(p - n * (p - origin).dot(&n))
}

/// The fitted frame plus the projected intermediates used for planning.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFit {
    pub frame: Frame,
    /// C', D', E', F' in world coordinates.
    pub projected: [Vec3; 4],
    /// Midpoint of C'D' (left pedicle).
    pub h: Vec3,
    /// Midpoint of E'F' (right pedicle).
    pub i: Vec3,
}

impl FrameFit {
    pub fn c(&self) -> Vec3 {
        self.projected[0]
    }
    pub fn d(&self) -> Vec3 {
        self.projected[1]
    }
    pub fn e(&self) -> Vec3 {
        self.projected[2]
    }
    pub fn f(&self) -> Vec3 {
        self.projected[3]
    }

    /// Midpoint of D'E'.
    pub fn j(&self) -> Vec3 {
        (self.d() + self.e()) * 0.5
    }
}

pub fn fit_frame_detailed(lm: &LandmarkSet) -> Result<FrameFit> {
    let (a, b) = (lm.get(Landmark::A), lm.get(Landmark::B));
    let ab = b - a;
    let ab_len = ab.norm();
    if ab_len < MIN_AXIS_MM {
        return Err(Error::DegenerateAxis(ab_len));
    }
    let z = ab / ab_len;
    let project = |l| {
        let p = lm.get(l);
        p - z * (p - b).dot(&z)
    };
    let projected = [Landmark::C, Landmark::D, Landmark::E, Landmark::F].map(project);
    let h = (projected[0] + projected[1]) * 0.5;
    let i = (projected[2] + projected[3]) * 0.5;
    let hi = h - i;
    let hi_len = hi.norm();
    if hi_len < MIN_AXIS_MM {
        return Err(Error::DegeneratePedicle(hi_len));
    }
    let y = hi / hi_len;
    let x = y.cross(&z);
    Ok(FrameFit {
        frame: Frame { origin: b, x, y, z },
        projected,
        h,
        i,
    })
}

pub fn fit_frame(lm: &LandmarkSet) -> Result<Frame> {
    fit_frame_detailed(lm).map(|f| f.frame)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneName {
    /// Plane 1, on the +Y (left) side.
    LeftLongitudinal,
    /// Plane 2, on the -Y (right) side.
    RightLongitudinal,
    /// Plane 3, caudal boundary for partial laminectomy.
    Transverse,
}

impl PlaneName {
    pub fn kind(self) -> PlaneKind {
        match self {
            PlaneName::LeftLongitudinal | PlaneName::RightLongitudinal => PlaneKind::Longitudinal,
            PlaneName::Transverse => PlaneKind::Transverse,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PlaneName::LeftLongitudinal => "left_longitudinal",
            PlaneName::RightLongitudinal => "right_longitudinal",
            PlaneName::Transverse => "transverse",
        }
    }
}

impl fmt::Display for PlaneName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneKind {
    Longitudinal,
    Transverse,
}

/// A cutting plane. The resected half-space is `{p : resect_side * normal·(p - point) > 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutPlane {
    pub name: PlaneName,
    #[serde(with = "crate::json::vec3")]
    pub point: Vec3,
    #[serde(with = "crate::json::vec3")]
    pub normal: Vec3,
    pub resect_side: i8,
}

impl CutPlane {
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(&(p - self.point))
    }

    pub fn is_resected(&self, p: Vec3) -> bool {
        self.resect_side as f64 * self.signed_distance(p) > 0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    /// Planes 1 and 2.
    Total,
    /// Planes 1, 2 and 3.
    #[default]
    Partial,
}

impl std::str::FromStr for PlanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "total" => Ok(PlanMode::Total),
            "partial" => Ok(PlanMode::Partial),
            other => Err(Error::InvalidParameter(format!(
                "mode `{other}` (expected total or partial)"
            ))),
        }
    }
}

pub fn plan_planes(lm: &LandmarkSet, mode: PlanMode) -> Result<Vec<CutPlane>> {
    plan_from_fit(&fit_frame_detailed(lm)?, lm, mode)
}

pub fn plan_from_fit(fit: &FrameFit, lm: &LandmarkSet, mode: PlanMode) -> Result<Vec<CutPlane>> {
    let f = &fit.frame;
    let y_left = f.to_frame(fit.c()).y;
    let y_right = f.to_frame(fit.f()).y;
    if y_left <= 0.0 || y_right >= 0.0 {
        return Err(Error::Orientation(format!(
            "frame-y of C' is {y_left:.6} mm and of F' is {y_right:.6} mm"
        )));
    }
    let mut planes = vec![
        CutPlane {
            name: PlaneName::LeftLongitudinal,
            point: f.origin + f.y * (LONGITUDINAL_FRACTION * y_left),
            normal: f.y,
            resect_side: 1,
        },
        CutPlane {
            name: PlaneName::RightLongitudinal,
            point: f.origin + f.y * (LONGITUDINAL_FRACTION * y_right),
            normal: f.y,
            resect_side: -1,
        },
    ];
    if mode == PlanMode::Partial {
        let j = fit.j();
        let k = j + (lm.get(Landmark::G) - j) * TRANSVERSE_FRACTION;
        planes.push(CutPlane {
            name: PlaneName::Transverse,
            point: k,
            normal: f.x,
            resect_side: -1,
        });
    }
    Ok(planes)
}
