//! Gaussian target heatmaps, argmax localization, MSE and landmark error metrics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::formats::RawTensor;
use crate::landmarks::{Landmark, LandmarkSet};
use crate::volume::{Dims, Grid, VoxelCoord};
use crate::{Error, Result, Vec3};

/// Gaussian width in voxels used when none is configured.
pub const DEFAULT_SIGMA: f64 = 3.0;

/// Isotropic 3D normal density at squared distance `dist2` (voxels²).
#[inline]
pub fn gaussian_density(dist2: f64, sigma: f64) -> f64 {
    (2.0 * PI).powf(-1.5) / (sigma * sigma * sigma) * (-dist2 / (2.0 * sigma * sigma)).exp()
}

/// One target channel: the normalized Gaussian centered on `center`.
pub fn make_target(dims: Dims, center: VoxelCoord, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidSigma(sigma));
    }
    let grid = Grid::unit(dims)?;
    let mut out = Vec::with_capacity(grid.len());
    for z in 0..dims[0] {
        let dz = z as f64 - center[0];
        for y in 0..dims[1] {
            let dy = y as f64 - center[1];
            for x in 0..dims[2] {
                let dx = x as f64 - center[2];
                out.push(gaussian_density(dz * dz + dy * dy + dx * dx, sigma));
            }
        }
    }
    Ok(out)
}

/// Per-landmark scalar fields sharing one grid, stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapStack {
    grid: Grid,
    names: Vec<Landmark>,
    data: Vec<f32>,
}

impl HeatmapStack {
    pub fn new(grid: Grid, names: Vec<Landmark>, data: Vec<f32>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::EmptyInput("heatmap stack has no channels"));
        }
        if data.len() != names.len() * grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} channels of {:?}",
                data.len(),
                names.len(),
                grid.dims()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "non-finite heatmap value in channel {}",
                names[i / grid.len()]
            )));
        }
        Ok(HeatmapStack { grid, names, data })
    }

    /// Target heatmaps for every landmark, centered at its fractional voxel position.
    pub fn targets(grid: &Grid, landmarks: &LandmarkSet, sigma: f64) -> Result<Self> {
        let mut data = Vec::with_capacity(7 * grid.len());
        for (_, p) in landmarks.iter() {
            let channel = make_target(grid.dims(), grid.world_to_voxel(p), sigma)?;
            data.extend(channel.into_iter().map(|v| v as f32));
        }
        HeatmapStack::new(grid.clone(), Landmark::ALL.to_vec(), data)
    }

    /// Wraps a rank-4 `(C, Z, Y, X)` tensor; the channels are named A, B, ... in order.
    pub fn from_raw(raw: RawTensor, grid: Grid) -> Result<Self> {
        if raw.dims.len() != 4 || raw.dims[1..] != grid.dims() {
            return Err(Error::ShapeMismatch(format!(
                "heatmap tensor {:?} does not match grid {:?}",
                raw.dims,
                grid.dims()
            )));
        }
        if raw.dims[0] > Landmark::ALL.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} channels, at most 7 supported",
                raw.dims[0]
            )));
        }
        let names = Landmark::ALL[..raw.dims[0]].to_vec();
        HeatmapStack::new(grid, names, raw.data)
    }

    pub fn to_raw(&self) -> RawTensor {
        let [z, y, x] = self.grid.dims();
        RawTensor {
            dims: vec![self.names.len(), z, y, x],
            data: self.data.clone(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn names(&self) -> &[Landmark] {
        &self.names
    }

    pub fn n_channels(&self) -> usize {
        self.names.len()
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Argmax result for one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalizedPoint {
    pub landmark: Landmark,
    pub voxel: [usize; 3],
    pub world: Vec3,
    /// Set when every voxel of the channel holds the same value.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Localization {
    pub points: Vec<LocalizedPoint>,
}

impl Localization {
    pub fn degenerate_channels(&self) -> Vec<Landmark> {
        self.points
            .iter()
            .filter(|p| p.degenerate)
            .map(|p| p.landmark)
            .collect()
    }

    /// Collects a full A..G set; fails when a landmark is missing.
    pub fn to_landmark_set(&self) -> Result<LandmarkSet> {
        let mut points = [None; 7];
        for p in &self.points {
            points[p.landmark.index()] = Some(p.world);
        }
        let mut out = [Vec3::zeros(); 7];
        for (lm, slot) in Landmark::ALL.iter().zip(points) {
            out[lm.index()] =
                slot.ok_or_else(|| Error::InvalidLandmarks(format!("no channel for {lm}")))?;
        }
        LandmarkSet::new(out)
    }
}

/// Index of the first maximum; scanning z-major order makes ties resolve to
/// the lexicographically smallest `(z, y, x)`.
fn argmax(values: &[f32]) -> (usize, bool) {
    let mut best = 0;
    let mut flat = true;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v != values[0] {
            flat = false;
        }
        if v > values[best] {
            best = i;
        }
    }
    (best, flat)
}

pub fn localize(stack: &HeatmapStack) -> Localization {
    let grid = &stack.grid;
    let points = stack
        .names
        .iter()
        .enumerate()
        .map(|(c, &landmark)| {
            let (i, degenerate) = argmax(stack.channel(c));
            if degenerate {
                log::warn!("degenerate heatmap channel {landmark}: all values equal");
            }
            let voxel = grid.unravel(i);
            LocalizedPoint {
                landmark,
                voxel,
                world: grid.voxel_to_world(voxel.map(|v| v as f64)),
                degenerate,
            }
        })
        .collect();
    Localization { points }
}

/// Mean squared difference over every channel and voxel.
pub fn mse_loss(pred: &HeatmapStack, target: &HeatmapStack) -> Result<f64> {
    if pred.grid.dims() != target.grid.dims() || pred.names.len() != target.names.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{:?} vs target {}x{:?}",
            pred.names.len(),
            pred.grid.dims(),
            target.names.len(),
            target.grid.dims()
        )));
    }
    let sum: f64 = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / pred.data.len() as f64)
}

/// Euclidean distance between a predicted and a reference point, in mm.
pub fn localization_error(pred: Vec3, truth: Vec3) -> f64 {
    let (dx, dy, dz) = (pred.x - truth.x, pred.y - truth.y, pred.z - truth.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    #[serde(serialize_with = "crate::json::sig9")]
    pub mean_mm: f64,
    /// Sample standard deviation (n - 1 denominator); zero for a single error.
    #[serde(serialize_with = "crate::json::sig9")]
    pub std_mm: f64,
    pub count: usize,
    #[serde(serialize_with = "crate::json::sig9_vec")]
    pub errors_mm: Vec<f64>,
}

/// Mean and sample standard deviation, accumulated in one pass.
pub fn aggregate_errors(errors: &[f64]) -> Result<LocalizationReport> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("no localization errors to aggregate"));
    }
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &e) in errors.iter().enumerate() {
        let delta = e - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (e - mean);
    }
    let n = errors.len();
    let std = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
    Ok(LocalizationReport {
        mean_mm: mean,
        std_mm: std,
        count: n,
        errors_mm: errors.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stack(dims: Dims, channels: Vec<Vec<f32>>) -> HeatmapStack {
        let names = Landmark::ALL[..channels.len()].to_vec();
        HeatmapStack::new(Grid::unit(dims).unwrap(), names, channels.concat()).unwrap()
    }

    #[test]
    fn peak_value_at_center() {
        let ch = make_target([5, 5, 5], [2.0, 2.0, 2.0], 1.0).unwrap();
        let peak = ch[Grid::unit([5, 5, 5]).unwrap().index(2, 2, 2)];
        assert!((peak - 0.063_493_635_934_240_97).abs() < 1e-15);
    }

    #[test]
    fn value_one_sigma_away() {
        let sigma = 2.0;
        let ch = make_target([9, 9, 9], [4.0, 4.0, 4.0], sigma).unwrap();
        let g = Grid::unit([9, 9, 9]).unwrap();
        let peak = ch[g.index(4, 4, 4)];
        let ring = ch[g.index(4, 6, 4)];
        assert!((ring - peak * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn radial_symmetry() {
        let ch = make_target([7, 7, 7], [3.0, 3.0, 3.0], 1.7).unwrap();
        let g = Grid::unit([7, 7, 7]).unwrap();
        assert_eq!(ch[g.index(1, 3, 3)], ch[g.index(3, 3, 5)]);
        assert_eq!(ch[g.index(2, 4, 3)], ch[g.index(3, 2, 4)]);
    }

    #[test]
    fn invalid_sigma() {
        assert!(matches!(make_target([2, 2, 2], [0.0; 3], 0.0), Err(Error::InvalidSigma(_))));
        assert!(make_target([2, 2, 2], [0.0; 3], -1.0).is_err());
        assert!(make_target([2, 2, 2], [0.0; 3], f64::NAN).is_err());
    }

    #[test]
    fn unique_peak_is_found() {
        let dims = [16, 32, 40];
        let g = Grid::unit(dims).unwrap();
        let mut ch = vec![0.0f32; g.len()];
        ch[g.index(10, 20, 30)] = 1.0;
        let loc = localize(&stack(dims, vec![ch]));
        assert_eq!(loc.points[0].voxel, [10, 20, 30]);
        assert!(!loc.points[0].degenerate);
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let dims = [2, 2, 2];
        let g = Grid::unit(dims).unwrap();
        let mut ch = vec![0.0f32; 8];
        ch[g.index(1, 0, 0)] = 5.0;
        ch[g.index(0, 0, 1)] = 5.0;
        assert_eq!(localize(&stack(dims, vec![ch])).points[0].voxel, [0, 0, 1]);
    }

    #[test]
    fn flat_channel_is_degenerate() {
        let loc = localize(&stack([2, 3, 4], vec![vec![0.25; 24], {
            let mut c = vec![0.0; 24];
            c[5] = 1.0;
            c
        }]));
        assert!(loc.points[0].degenerate);
        assert_eq!(loc.points[0].voxel, [0, 0, 0]);
        assert_eq!(loc.degenerate_channels(), vec![Landmark::A]);
    }

    #[test]
    fn localize_reports_world_coordinates() {
        let grid = Grid::new([4, 4, 4], Vec3::new(0.5, 1.0, 2.0), Vec3::new(10.0, 0.0, -4.0)).unwrap();
        let mut ch = vec![0.0f32; 64];
        ch[grid.index(1, 2, 3)] = 1.0;
        let s = HeatmapStack::new(grid, vec![Landmark::G], ch).unwrap();
        assert_eq!(localize(&s).points[0].world, Vec3::new(11.5, 2.0, -2.0));
    }

    #[test]
    fn mse_examples() {
        let a = stack([1, 1, 2], vec![vec![0.0, 0.0]]);
        let b = stack([1, 1, 2], vec![vec![1.0, 0.0]]);
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mse_loss(&a, &b).unwrap(), 0.5);
        let c = stack([1, 1, 2], vec![vec![0.5, 0.5]]);
        assert_eq!(mse_loss(&c, &a).unwrap(), 0.25);
        let d = stack([1, 2, 1], vec![vec![0.0, 0.0]]);
        assert!(matches!(mse_loss(&a, &d), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(localization_error(Vec3::zeros(), Vec3::new(1.0, 2.0, 2.0)), 3.0);
        assert_eq!(localization_error(Vec3::zeros(), Vec3::new(3.0, 4.0, 0.0)), 5.0);
        let p = Vec3::new(1.25, -3.0, 8.0);
        assert_eq!(localization_error(p, p), 0.0);
    }

    #[test]
    fn aggregate_examples() {
        let r = aggregate_errors(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((r.mean_mm, r.std_mm), (2.0, 0.0));
        let r = aggregate_errors(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.mean_mm, r.std_mm), (2.0, 1.0));
        let r = aggregate_errors(&[5.0]).unwrap();
        assert_eq!((r.mean_mm, r.std_mm, r.count), (5.0, 0.0, 1));
        assert!(matches!(aggregate_errors(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn raw_round_trip_checks_grid() {
        let s = stack([2, 2, 2], vec![vec![1.0; 8], vec![2.0; 8]]);
        let raw = s.to_raw();
        assert_eq!(raw.dims, vec![2, 2, 2, 2]);
        assert_eq!(HeatmapStack::from_raw(raw.clone(), s.grid().clone()).unwrap(), s);
        assert!(HeatmapStack::from_raw(raw, Grid::unit([2, 2, 4]).unwrap()).is_err());
    }

    fn channel(n: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec(-10.0f32..10.0, n)
    }

    proptest! {
        #[test]
        fn mse_symmetric_and_relaxed_triangle(a in channel(12), b in channel(12), c in channel(12)) {
            let (a, b, c) = (stack([1, 3, 4], vec![a]), stack([1, 3, 4], vec![b]), stack([1, 3, 4], vec![c]));
            let ab = mse_loss(&a, &b).unwrap();
            prop_assert_eq!(ab, mse_loss(&b, &a).unwrap());
            let ac = mse_loss(&a, &c).unwrap();
            let bc = mse_loss(&b, &c).unwrap();
            prop_assert!(ac <= 2.0 * (ab + bc) + 1e-9);
            prop_assert!(ab >= 0.0);
        }

        #[test]
        fn mse_of_constant_offset(a in channel(6), c in -3.0f32..3.0) {
            // Offsets exactly representable after the shift keep the identity exact.
            let c = (c * 8.0).round() / 8.0;
            let a: Vec<f32> = a.iter().map(|v| (v * 8.0).round() / 8.0).collect();
            let shifted: Vec<f32> = a.iter().map(|v| v + c).collect();
            let l = mse_loss(&stack([1, 2, 3], vec![shifted]), &stack([1, 2, 3], vec![a])).unwrap();
            prop_assert!((l - (c as f64).powi(2)).abs() < 1e-12);
        }

        #[test]
        fn distance_is_a_metric(p in prop::array::uniform9(-100.0f64..100.0)) {
            let a = Vec3::new(p[0], p[1], p[2]);
            let b = Vec3::new(p[3], p[4], p[5]);
            let c = Vec3::new(p[6], p[7], p[8]);
            let ab = localization_error(a, b);
            prop_assert_eq!(ab, localization_error(b, a));
            prop_assert!(localization_error(a, c) <= ab + localization_error(b, c) + 1e-9);
            prop_assert_eq!(localization_error(a, a), 0.0);
            prop_assert_eq!(ab == 0.0, a == b);
        }
    }
}
