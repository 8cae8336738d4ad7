//! A/B/C grading of cutting planes against reference landmarks, and
//! aggregation into a per-kind summary table.
//!
//! Longitudinal planes are located by where they cross the reference Y axis,
//! as a fraction `r` of the distance from the midline to the medial pedicle
//! edge on their own side. Transverse planes are located by where they cross
//! the reference X axis, as a fraction `s` of the span from the lower
//! endplate (G, s = 0) up to the lower pedicle edge (J, s = 1).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frame::{fit_frame_detailed, CutPlane, FrameFit, PlaneKind, PlaneName};
use crate::landmarks::{Landmark, LandmarkSet};
use crate::{Error, Result, Vec3};

/// Tolerance on "perpendicular to the coronal plane", in degrees.
pub const DEFAULT_TAU_DEG: f64 = 5.0;

const PARALLEL_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Grade {
    A,
    B,
    C,
}

impl Grade {
    fn rank(self) -> u8 {
        match self {
            Grade::A => 2,
            Grade::B => 1,
            Grade::C => 0,
        }
    }
}

/// A is best: `Grade::A > Grade::B > Grade::C`.
impl Ord for Grade {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for Grade {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grade::A => "A",
            Grade::B => "B",
            Grade::C => "C",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeOutcome {
    pub plane_name: PlaneName,
    pub grade: Grade,
    /// `r` for longitudinal planes, `s` for transverse ones; absent when the
    /// plane failed the perpendicularity gate or never meets the axis.
    #[serde(serialize_with = "crate::json::sig9_opt")]
    pub r_or_s: Option<f64>,
    pub reason: String,
}

impl GradeOutcome {
    pub fn kind(&self) -> PlaneKind {
        self.plane_name.kind()
    }
}

pub fn classify_longitudinal(r: f64) -> (Grade, &'static str) {
    if r > 1.0 {
        (Grade::C, "lateral to the medial edge of the pedicle")
    } else if r >= 2.0 / 3.0 {
        (Grade::A, "lateral third")
    } else if r >= 1.0 / 3.0 {
        (Grade::B, "middle third")
    } else if r >= 0.0 {
        (Grade::C, "medial third")
    } else {
        (Grade::C, "crosses the midsagittal plane")
    }
}

pub fn classify_transverse(s: f64) -> (Grade, &'static str) {
    if s > 1.0 {
        (Grade::C, "above the lower edge of the pedicle")
    } else if s >= 0.5 {
        (Grade::A, "cephalic half")
    } else if s >= 0.0 {
        (Grade::B, "caudal half")
    } else {
        (Grade::C, "below the lower endplate")
    }
}

/// Reference geometry derived once from ground-truth landmarks.
#[derive(Clone, Debug)]
pub struct Reference {
    fit: FrameFit,
    y_left: f64,
    y_right: f64,
    x_j: f64,
    x_g: f64,
}

impl Reference {
    pub fn new(truth: &LandmarkSet) -> Result<Self> {
        let fit = fit_frame_detailed(truth)?;
        let f = &fit.frame;
        Ok(Reference {
            y_left: f.to_frame(fit.c()).y,
            y_right: f.to_frame(fit.f()).y,
            x_j: f.to_frame(fit.j()).x,
            x_g: f.to_frame(truth.get(Landmark::G)).x,
            fit,
        })
    }

    pub fn fit(&self) -> &FrameFit {
        &self.fit
    }

    /// Signed position where the plane crosses the axis line `origin + t * axis`.
    fn crossing(&self, plane: &CutPlane, axis: Vec3) -> Option<f64> {
        let denom = plane.normal.dot(&axis);
        if denom.abs() < PARALLEL_EPS {
            return None;
        }
        Some(plane.normal.dot(&(plane.point - self.fit.frame.origin)) / denom)
    }

    fn perpendicular(&self, plane: &CutPlane, tau_deg: f64) -> bool {
        let n = plane.normal.normalize();
        n.dot(&self.fit.frame.z).abs() <= tau_deg.to_radians().sin()
    }

    /// Where the plane crosses the reference axis, or why it is graded C
    /// without a position.
    fn axis_position(&self, plane: &CutPlane, tau_deg: f64, axis: Vec3) -> Result<f64, &'static str> {
        if !self.perpendicular(plane, tau_deg) {
            return Err("not perpendicular to the coronal plane");
        }
        self.crossing(plane, axis).ok_or("non-intersecting")
    }

    pub fn grade_longitudinal(&self, plane: &CutPlane, tau_deg: f64) -> Result<GradeOutcome> {
        let edge = match plane.name {
            PlaneName::LeftLongitudinal => self.y_left,
            PlaneName::RightLongitudinal => self.y_right,
            PlaneName::Transverse => {
                return Err(Error::InvalidParameter(
                    "transverse plane passed to the longitudinal grader".into(),
                ))
            }
        };
        if self.y_left <= 0.0 || self.y_right >= 0.0 {
            return Err(Error::Orientation(format!(
                "reference frame-y of C' is {:.6} mm and of F' is {:.6} mm",
                self.y_left, self.y_right
            )));
        }
        let ratio = self
            .axis_position(plane, tau_deg, self.fit.frame.y)
            .map(|y| y / edge);
        Ok(outcome(plane.name, ratio, classify_longitudinal))
    }

    pub fn grade_transverse(&self, plane: &CutPlane, tau_deg: f64) -> Result<GradeOutcome> {
        if plane.name != PlaneName::Transverse {
            return Err(Error::InvalidParameter(
                "longitudinal plane passed to the transverse grader".into(),
            ));
        }
        if self.x_j <= self.x_g {
            return Err(Error::DegenerateRegion(format!(
                "frame-x of J ({:.6}) is not above G ({:.6})",
                self.x_j, self.x_g
            )));
        }
        let ratio = self
            .axis_position(plane, tau_deg, self.fit.frame.x)
            .map(|x| (x - self.x_g) / (self.x_j - self.x_g));
        Ok(outcome(plane.name, ratio, classify_transverse))
    }

    pub fn grade(&self, plane: &CutPlane, tau_deg: f64) -> Result<GradeOutcome> {
        match plane.name.kind() {
            PlaneKind::Longitudinal => self.grade_longitudinal(plane, tau_deg),
            PlaneKind::Transverse => self.grade_transverse(plane, tau_deg),
        }
    }
}

fn outcome(
    plane_name: PlaneName,
    ratio: Result<f64, &'static str>,
    classify: fn(f64) -> (Grade, &'static str),
) -> GradeOutcome {
    let (grade, r_or_s, reason) = match ratio {
        Ok(r) => {
            let (g, reason) = classify(r);
            (g, Some(r), reason)
        }
        Err(reason) => (Grade::C, None, reason),
    };
    GradeOutcome {
        plane_name,
        grade,
        r_or_s,
        reason: reason.to_string(),
    }
}

pub fn grade_longitudinal(plane: &CutPlane, truth: &LandmarkSet, tau_deg: f64) -> Result<GradeOutcome> {
    Reference::new(truth)?.grade_longitudinal(plane, tau_deg)
}

pub fn grade_transverse(plane: &CutPlane, truth: &LandmarkSet, tau_deg: f64) -> Result<GradeOutcome> {
    Reference::new(truth)?.grade_transverse(plane, tau_deg)
}

/// Grades every plane of a plan against one set of reference landmarks.
pub fn grade_plan(planes: &[CutPlane], truth: &LandmarkSet, tau_deg: f64) -> Result<Vec<GradeOutcome>> {
    let reference = Reference::new(truth)?;
    planes.iter().map(|p| reference.grade(p, tau_deg)).collect()
}

/// Count and percentage of one grade.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradeCount {
    pub count: usize,
    /// Rounded half-up to two decimals.
    pub percent: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    #[serde(rename = "A")]
    pub a: GradeCount,
    #[serde(rename = "B")]
    pub b: GradeCount,
    #[serde(rename = "C")]
    pub c: GradeCount,
    pub total: usize,
}

impl KindSummary {
    fn from_counts(counts: [usize; 3]) -> Self {
        let total: usize = counts.iter().sum();
        let entry = |count| GradeCount {
            count,
            percent: percent_half_up(count, total),
        };
        KindSummary {
            a: entry(counts[0]),
            b: entry(counts[1]),
            c: entry(counts[2]),
            total,
        }
    }

    pub fn get(&self, grade: Grade) -> GradeCount {
        match grade {
            Grade::A => self.a,
            Grade::B => self.b,
            Grade::C => self.c,
        }
    }
}

/// `count / total * 100`, rounded half-up to hundredths in exact integer arithmetic.
pub fn percent_half_up(count: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let (count, total) = (count as u128, total as u128);
    let hundredths = (2 * count * 10_000 + total) / (2 * total);
    hundredths as f64 / 100.0
}

/// Per-kind grade distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub longitudinal: KindSummary,
    pub transverse: KindSummary,
}

impl PlanReport {
    pub fn get(&self, kind: PlaneKind) -> &KindSummary {
        match kind {
            PlaneKind::Longitudinal => &self.longitudinal,
            PlaneKind::Transverse => &self.transverse,
        }
    }

    /// Plain-text table, one row per grade.
    pub fn to_table(&self) -> String {
        let cell = |g: GradeCount| format!("{} ({:.2}%)", g.count, g.percent);
        let mut out = format!(
            "{:<20}{:<30}{:<30}\n",
            "", "Longitudinal cutting plane", "Transverse cutting plane"
        );
        for (label, grade) in [
            ("Grade A, excellent", Grade::A),
            ("Grade B, good", Grade::B),
            ("Grade C, poor", Grade::C),
        ] {
            out += &format!(
                "{:<20}{:<30}{:<30}\n",
                label,
                cell(self.longitudinal.get(grade)),
                cell(self.transverse.get(grade))
            );
        }
        out += &format!(
            "{:<20}{:<30}{:<30}\n",
            "Total", self.longitudinal.total, self.transverse.total
        );
        out
    }
}

pub fn aggregate<I>(grades: I) -> PlanReport
where
    I: IntoIterator<Item = (PlaneKind, Grade)>,
{
    let mut counts = [[0usize; 3]; 2];
    for (kind, grade) in grades {
        let k = match kind {
            PlaneKind::Longitudinal => 0,
            PlaneKind::Transverse => 1,
        };
        let g = match grade {
            Grade::A => 0,
            Grade::B => 1,
            Grade::C => 2,
        };
        counts[k][g] += 1;
    }
    PlanReport {
        longitudinal: KindSummary::from_counts(counts[0]),
        transverse: KindSummary::from_counts(counts[1]),
    }
}
