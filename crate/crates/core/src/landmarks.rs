//! The seven vertebral landmarks and their JSON representation.
//!
//! | name | location |
//! |------|----------|
//! | A | center of the anterior edge of the vertebral body |
//! | B | center of the posterior edge of the vertebral body |
//! | C | medial edge of the left pedicle |
//! | D | lower edge of the left pedicle |
//! | E | lower edge of the right pedicle |
//! | F | medial edge of the right pedicle |
//! | G | midpoint of the posterior side of the lower endplate |

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::json::round_sig9;
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Landmark {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl Landmark {
    pub const ALL: [Landmark; 7] = [
        Landmark::A,
        Landmark::B,
        Landmark::C,
        Landmark::D,
        Landmark::E,
        Landmark::F,
        Landmark::G,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["A", "B", "C", "D", "E", "F", "G"][self.index()]
    }

    pub fn from_name(name: &str) -> Option<Landmark> {
        Landmark::ALL.into_iter().find(|l| l.name() == name)
    }
}

impl fmt::Display for Landmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// All seven landmarks in world millimeters.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSet {
    points: [Vec3; 7],
}

impl LandmarkSet {
    pub fn new(points: [Vec3; 7]) -> Result<Self> {
        for (lm, p) in Landmark::ALL.iter().zip(&points) {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidLandmarks(format!("{lm} has non-finite coordinates")));
            }
        }
        if points[0] == points[1] {
            return Err(Error::InvalidLandmarks("A and B coincide".into()));
        }
        Ok(LandmarkSet { points })
    }

    pub fn get(&self, lm: Landmark) -> Vec3 {
        self.points[lm.index()]
    }

    pub fn points(&self) -> &[Vec3; 7] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = (Landmark, Vec3)> + '_ {
        Landmark::ALL.into_iter().zip(self.points.iter().copied())
    }

    /// Applies `f` to every point. Fails if the result is no longer a valid set.
    pub fn map(&self, mut f: impl FnMut(Landmark, Vec3) -> Vec3) -> Result<LandmarkSet> {
        let mut points = self.points;
        for (lm, p) in Landmark::ALL.into_iter().zip(points.iter_mut()) {
            *p = f(lm, *p);
        }
        LandmarkSet::new(points)
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl Serialize for LandmarkSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, [f64; 3]> = self
            .iter()
            .map(|(lm, p)| (lm.name(), [round_sig9(p.x), round_sig9(p.y), round_sig9(p.z)]))
            .collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LandmarkSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, [f64; 3]>::deserialize(deserializer)?;
        let mut points = [Vec3::zeros(); 7];
        for lm in Landmark::ALL {
            let p = map
                .get(lm.name())
                .ok_or_else(|| D::Error::custom(format!("missing landmark {lm}")))?;
            points[lm.index()] = Vec3::new(p[0], p[1], p[2]);
        }
        if let Some(extra) = map.keys().find(|k| Landmark::from_name(k).is_none()) {
            return Err(D::Error::custom(format!("unknown landmark `{extra}`")));
        }
        LandmarkSet::new(points).map_err(D::Error::custom)
    }
}
