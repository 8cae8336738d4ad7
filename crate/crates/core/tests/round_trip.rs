use std::path::Path;

use alcpp::frame::{fit_frame, CutPlane, Frame, PlanMode};
use alcpp::grading::{grade_plan, GradeOutcome, PlanReport};
use alcpp::heatmap::{aggregate_errors, LocalizationReport};
use alcpp::phantom::{generate_phantom, jitter_landmarks, PhantomParams};
use alcpp::pipeline::{read_heatmaps, read_volume, read_weights, write_heatmaps, write_volume};
use alcpp::spunet::{save_weights, ArchConfig, WeightStore};
use alcpp::{aggregate, json, plan_planes, HeatmapStack, LandmarkSet, PipelineConfig};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Written once, read back and written again: the bytes must not move and
/// the second read must equal the first.
fn stable<T>(dir: &Path, name: &str, value: &T) -> T
where
    T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug,
{
    let (a, b) = (dir.join(format!("{name}.1.json")), dir.join(format!("{name}.2.json")));
    json::write(&a, value).unwrap();
    let first: T = json::read(&a).unwrap();
    json::write(&b, &first).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{name}");
    let second: T = json::read(&b).unwrap();
    assert_eq!(first, second, "{name}");
    first
}

#[test]
fn json_schemas_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let truth = alcpp::phantom::phantom_landmarks(&PhantomParams::random(5)).unwrap();
    let noisy = jitter_landmarks(&truth, 1.0, 9).unwrap();

    let lm: LandmarkSet = stable(d, "landmarks", &noisy);
    for ((_, a), (_, b)) in lm.iter().zip(noisy.iter()) {
        assert!((a - b).norm() < 1e-6);
    }
    stable::<Frame>(d, "frame", &fit_frame(&noisy).unwrap());
    let planes = plan_planes(&noisy, PlanMode::Partial).unwrap();
    let planes: Vec<CutPlane> = stable(d, "planes", &planes);
    let grades = grade_plan(&planes, &truth, 5.0).unwrap();
    let grades: Vec<GradeOutcome> = stable(d, "grades", &grades);
    let report = aggregate(grades.iter().map(|g| (g.kind(), g.grade)));
    assert_eq!(stable::<PlanReport>(d, "report", &report), report);
    let errors: Vec<f64> = (1..20).map(|i| (i as f64).sqrt() / 3.0).collect();
    stable::<LocalizationReport>(d, "localization", &aggregate_errors(&errors).unwrap());
    let cfg = PipelineConfig::default();
    assert_eq!(stable(d, "config", &cfg), cfg);
    let params = PhantomParams::random(3);
    let back = stable(d, "params", &params);
    assert_eq!(back.seed, params.seed);
}

#[test]
fn binary_formats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ph = generate_phantom(&PhantomParams { dims: [40, 110, 100], spacing: [0.8, 0.9, 1.2], ..PhantomParams::default() }).unwrap();
    write_volume(&d.join("v.rvol"), &ph.volume).unwrap();
    let vol = read_volume(&d.join("v.rvol")).unwrap();
    assert_eq!(vol, ph.volume);

    let stack = HeatmapStack::targets(vol.grid(), &ph.landmarks, 2.0).unwrap();
    write_heatmaps(&d.join("h.rten"), &stack).unwrap();
    assert_eq!(read_heatmaps(&d.join("h.rten"), vol.grid()).unwrap(), stack);

    let arch = ArchConfig::smoke();
    let store = WeightStore::random(&arch, 4);
    json::write_atomic(&d.join("w.spuw"), &save_weights(&store)).unwrap();
    assert_eq!(read_weights(&d.join("w.spuw"), &arch).unwrap(), store);
    let err = read_weights(&d.join("w.spuw"), &ArchConfig::full()).unwrap_err();
    assert_eq!(err.kind(), "weights");
}
