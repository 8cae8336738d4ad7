//! File-level operations behind the `alcpp` commands.
//!
//! Every function reads its inputs, calls one library operation and writes
//! the result atomically. Errors carry the path of the file involved.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::formats::{decode_rten, decode_rvol, encode_rten, encode_rvol};
use crate::frame::{fit_frame, plan_planes, CutPlane, PlanMode};
use crate::grading::{aggregate, grade_plan, GradeOutcome, PlanReport};
use crate::heatmap::{aggregate_errors, localization_error, localize, HeatmapStack, LocalizationReport};
use crate::phantom::{generate_phantom, Phantom, PhantomParams};
use crate::spunet::{forward, load_weights, save_weights, ArchConfig, WeightStore};
use crate::volume::{self, BoundingBox, Dims, Grid, Volume};
use crate::{json, Error, LandmarkSet, Result};

pub fn read_volume(path: &Path) -> Result<Volume> {
    decode_rvol(&json::read_bytes(path)?).map_err(|e| e.in_file(path))
}

pub fn write_volume(path: &Path, vol: &Volume) -> Result<()> {
    json::write_atomic(path, &encode_rvol(vol))
}

pub fn read_landmarks(path: &Path) -> Result<LandmarkSet> {
    json::read(path)
}

pub fn write_landmarks(path: &Path, lm: &LandmarkSet) -> Result<()> {
    json::write(path, lm)
}

/// Heatmaps are stored without geometry; `grid` comes from the matching volume.
pub fn read_heatmaps(path: &Path, grid: &Grid) -> Result<HeatmapStack> {
    let raw = decode_rten(&json::read_bytes(path)?).map_err(|e| e.in_file(path))?;
    HeatmapStack::from_raw(raw, grid.clone()).map_err(|e| e.in_file(path))
}

pub fn write_heatmaps(path: &Path, stack: &HeatmapStack) -> Result<()> {
    json::write_atomic(path, &encode_rten(&stack.to_raw()))
}

pub fn read_weights(path: &Path, arch: &ArchConfig) -> Result<WeightStore> {
    load_weights(&json::read_bytes(path)?, arch).map_err(|e| e.in_file(path))
}

pub fn synth(params: &PhantomParams, volume_out: &Path, landmarks_out: &Path) -> Result<Phantom> {
    let phantom = generate_phantom(params)?;
    write_volume(volume_out, &phantom.volume)?;
    write_landmarks(landmarks_out, &phantom.landmarks)?;
    Ok(phantom)
}

pub fn window(input: &Path, output: &Path, w_min: f64, w_max: f64) -> Result<Volume> {
    let out = volume::apply_window(&read_volume(input)?, w_min, w_max)?;
    write_volume(output, &out)?;
    Ok(out)
}

pub fn crop(input: &Path, output: &Path, bbox: &BoundingBox) -> Result<Volume> {
    let out = volume::crop(&read_volume(input)?, bbox).map_err(|e| e.in_file(input))?;
    write_volume(output, &out)?;
    Ok(out)
}

/// Resamples the volume and, when given, carries a landmark file along.
pub fn resample(
    input: &Path,
    output: &Path,
    dims: Dims,
    landmarks: Option<(&Path, &Path)>,
) -> Result<Volume> {
    let src = read_volume(input)?;
    let out = volume::resample(&src, dims)?;
    if let Some((lm_in, lm_out)) = landmarks {
        let lm = volume::map_landmarks(&read_landmarks(lm_in)?, src.grid(), out.grid())?;
        write_landmarks(lm_out, &lm)?;
    }
    write_volume(output, &out)?;
    Ok(out)
}

/// Oracle heatmaps: Gaussian targets at the given landmarks on the grid of `reference`.
pub fn heatmap(reference: &Path, landmarks: &Path, output: &Path, sigma: f64) -> Result<HeatmapStack> {
    let grid = read_volume(reference)?.grid().clone();
    let stack = HeatmapStack::targets(&grid, &read_landmarks(landmarks)?, sigma)
        .map_err(|e| e.in_file(landmarks))?;
    write_heatmaps(output, &stack)?;
    Ok(stack)
}

pub fn localize_file(heatmaps: &Path, reference: &Path, output: &Path) -> Result<LandmarkSet> {
    let grid = read_volume(reference)?.grid().clone();
    let lm = localize(&read_heatmaps(heatmaps, &grid)?)
        .to_landmark_set()
        .map_err(|e| e.in_file(heatmaps))?;
    write_landmarks(output, &lm)?;
    Ok(lm)
}

/// Network forward pass. The architecture is read off the weight shapes.
pub fn infer(input: &Path, weights: &Path, output: &Path) -> Result<HeatmapStack> {
    let vol = read_volume(input)?;
    let store = WeightStore::from_bytes(&json::read_bytes(weights)?).map_err(|e| e.in_file(weights))?;
    let mut arch = ArchConfig::from_weights(&store, ArchConfig::smoke().input_dims)
        .map_err(|e| e.in_file(weights))?;
    arch.input_dims = vol.dims();
    arch.validate().map_err(|e| e.in_file(input))?;
    let stack = forward(&vol, &store, &arch)?;
    write_heatmaps(output, &stack)?;
    Ok(stack)
}

pub fn init_weights(arch: &ArchConfig, seed: u64, output: &Path) -> Result<WeightStore> {
    arch.validate()?;
    let store = WeightStore::random(arch, seed);
    json::write_atomic(output, &save_weights(&store))?;
    Ok(store)
}

pub fn plan(
    landmarks: &Path,
    output: &Path,
    mode: PlanMode,
    frame_out: Option<&Path>,
) -> Result<Vec<CutPlane>> {
    let lm = read_landmarks(landmarks)?;
    let planes = plan_planes(&lm, mode).map_err(|e| e.in_file(landmarks))?;
    if let Some(path) = frame_out {
        json::write(path, &fit_frame(&lm).map_err(|e| e.in_file(landmarks))?)?;
    }
    json::write(output, &planes)?;
    Ok(planes)
}

pub fn grade(planes: &Path, truth: &Path, output: &Path, tau_deg: f64) -> Result<Vec<GradeOutcome>> {
    let planes: Vec<CutPlane> = json::read(planes)?;
    let grades = grade_plan(&planes, &read_landmarks(truth)?, tau_deg).map_err(|e| e.in_file(truth))?;
    json::write(output, &grades)?;
    Ok(grades)
}

/// Pools every grade list into one distribution table.
pub fn report(grades: &[PathBuf], output: &Path) -> Result<PlanReport> {
    if grades.is_empty() {
        return Err(Error::EmptyInput("no grade files"));
    }
    let mut all = Vec::new();
    for path in grades {
        let list: Vec<GradeOutcome> = json::read(path)?;
        all.extend(list.into_iter().map(|g| (g.kind(), g.grade)));
    }
    let report = aggregate(all);
    json::write(output, &report)?;
    Ok(report)
}

/// Euclidean errors over every landmark of every `(predicted, truth)` pair.
pub fn eval_landmarks(pairs: &[(PathBuf, PathBuf)], output: &Path) -> Result<LocalizationReport> {
    let mut errors = Vec::new();
    for (pred, truth) in pairs {
        let (p, t) = (read_landmarks(pred)?, read_landmarks(truth)?);
        errors.extend(p.iter().zip(t.iter()).map(|((_, a), (_, b))| localization_error(a, b)));
    }
    let report = aggregate_errors(&errors)?;
    json::write(output, &report)?;
    Ok(report)
}

pub const RUN_VOLUME: &str = "volume.rvol";
pub const RUN_TRUTH: &str = "landmarks.json";
pub const RUN_WINDOWED: &str = "windowed.rvol";
pub const RUN_HEATMAPS: &str = "heatmaps.rten";
pub const RUN_LOCALIZED: &str = "localized.json";
pub const RUN_LOCALIZATION: &str = "localization.json";
pub const RUN_FRAME: &str = "frame.json";
pub const RUN_PLANES: &str = "planes.json";
pub const RUN_GRADES: &str = "grades.json";
pub const RUN_REPORT: &str = "report.json";

/// Artifacts written by [`run_oracle`], in order.
pub const RUN_ARTIFACTS: [&str; 10] = [
    RUN_VOLUME,
    RUN_TRUTH,
    RUN_WINDOWED,
    RUN_HEATMAPS,
    RUN_LOCALIZED,
    RUN_LOCALIZATION,
    RUN_FRAME,
    RUN_PLANES,
    RUN_GRADES,
    RUN_REPORT,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub localization: LocalizationReport,
    pub report: PlanReport,
    pub artifacts: Vec<PathBuf>,
}

/// Synthesize, window, build oracle heatmaps, localize, plan, grade and
/// report, with every intermediate written to `out_dir`.
pub fn run_oracle(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let at = |name: &str| out_dir.join(name);
    let params = PhantomParams {
        dims: cfg.dims,
        ..PhantomParams::random(cfg.seed)
    };
    synth(&params, &at(RUN_VOLUME), &at(RUN_TRUTH))?;
    window(&at(RUN_VOLUME), &at(RUN_WINDOWED), cfg.window.w_min, cfg.window.w_max)?;
    heatmap(&at(RUN_WINDOWED), &at(RUN_TRUTH), &at(RUN_HEATMAPS), cfg.sigma)?;
    localize_file(&at(RUN_HEATMAPS), &at(RUN_WINDOWED), &at(RUN_LOCALIZED))?;
    let localization = eval_landmarks(&[(at(RUN_LOCALIZED), at(RUN_TRUTH))], &at(RUN_LOCALIZATION))?;
    plan(&at(RUN_LOCALIZED), &at(RUN_PLANES), cfg.mode, Some(&at(RUN_FRAME)))?;
    grade(&at(RUN_PLANES), &at(RUN_TRUTH), &at(RUN_GRADES), cfg.tau)?;
    let report = report(&[at(RUN_GRADES)], &at(RUN_REPORT))?;
    Ok(RunSummary {
        localization,
        report,
        artifacts: RUN_ARTIFACTS.iter().map(|n| at(n)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_input_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.rvol");
        let err = window(&missing, &dir.path().join("o.rvol"), -200.0, 600.0).unwrap_err();
        assert_eq!(err.kind(), "io");
        assert_eq!(err.path(), Some(missing.as_path()));
    }

    #[test]
    fn bad_magic_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.rvol");
        std::fs::write(&bad, b"NOPE\x01").unwrap();
        let out = dir.path().join("o.rvol");
        let err = window(&bad, &out, -200.0, 600.0).unwrap_err();
        assert_eq!(err.kind(), "format");
        assert_eq!(err.path(), Some(bad.as_path()));
        assert!(!out.exists());
    }

    #[test]
    fn oracle_run_is_deterministic() {
        let cfg = PipelineConfig { dims: [48, 96, 96], seed: 3, ..PipelineConfig::default() };
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let s1 = run_oracle(&cfg, d1.path()).unwrap();
        run_oracle(&cfg, d2.path()).unwrap();
        for name in RUN_ARTIFACTS {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert!(a == b, "{name} differs");
        }
        assert_eq!(s1.report.longitudinal.total, 2);
        assert_eq!(s1.report.transverse.total, 1);
        // Argmax snaps to the voxel grid, so errors stay within half a diagonal.
        assert!(s1.localization.errors_mm.iter().all(|&e| e <= 3f64.sqrt() / 2.0 + 1e-9));
    }
}
