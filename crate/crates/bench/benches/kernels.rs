use alcpp::frame::PlanMode;
use alcpp::grading::grade_plan;
use alcpp::heatmap::{localize, make_target, HeatmapStack};
use alcpp::phantom::{generate_phantom, phantom_landmarks, PhantomParams};
use alcpp::spunet::{conv3d, forward, ArchConfig, ConvWeights, Tensor5, WeightStore};
use alcpp::volume::{apply_window, resample, Grid, Volume};
use alcpp::plan_planes;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn ramp(n: usize) -> Vec<f32> {
    (0..n).map(|i| ((i * 7919) % 1000) as f32 / 1000.0 - 0.5).collect()
}

fn conv(c: &mut Criterion) {
    let input = Tensor5::new([1, 16, 36, 64, 64], ramp(16 * 36 * 64 * 64)).unwrap();
    let weight = ramp(16 * 16 * 27);
    let bias = vec![0.1; 16];
    let w = ConvWeights::new(&weight, &bias, [16, 16, 3, 3, 3]).unwrap();
    c.bench_function("conv3d 16->16 36x64x64", |b| b.iter(|| conv3d(black_box(&input), &w).unwrap()));
}

fn smoke_forward(c: &mut Criterion) {
    let arch = ArchConfig::smoke();
    let store = WeightStore::random(&arch, 1);
    let grid = Grid::unit(arch.input_dims).unwrap();
    let vol = Volume::new(grid.clone(), ramp(grid.len())).unwrap();
    c.bench_function("forward smoke 24x32x32", |b| b.iter(|| forward(black_box(&vol), &store, &arch).unwrap()));
}

fn heatmaps(c: &mut Criterion) {
    let dims = [72, 128, 128];
    c.bench_function("make_target 72x128x128", |b| {
        b.iter(|| make_target(dims, black_box([36.2, 60.7, 70.1]), 3.0).unwrap())
    });
    let p = PhantomParams::random(1);
    let lm = phantom_landmarks(&p).unwrap();
    let stack = HeatmapStack::targets(&p.grid().unwrap(), &lm, 3.0).unwrap();
    c.bench_function("localize 7x72x128x128", |b| b.iter(|| localize(black_box(&stack))));
}

fn volume_ops(c: &mut Criterion) {
    let ph = generate_phantom(&PhantomParams::random(2)).unwrap();
    c.bench_function("generate_phantom 72x128x128", |b| {
        b.iter(|| generate_phantom(black_box(&PhantomParams::random(2))).unwrap())
    });
    c.bench_function("apply_window 72x128x128", |b| {
        b.iter(|| apply_window(black_box(&ph.volume), -200.0, 600.0).unwrap())
    });
    c.bench_function("resample 72x128x128 -> 48x96x96", |b| {
        b.iter(|| resample(black_box(&ph.volume), [48, 96, 96]).unwrap())
    });
}

fn planning(c: &mut Criterion) {
    let sets: Vec<_> = (0..100)
        .map(|s| phantom_landmarks(&PhantomParams::random(s)).unwrap())
        .collect();
    c.bench_function("plan + grade x100", |b| {
        b.iter(|| {
            for lm in &sets {
                let planes = plan_planes(lm, PlanMode::Partial).unwrap();
                black_box(grade_plan(&planes, lm, 5.0).unwrap());
            }
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = conv, smoke_forward, heatmaps, volume_ops, planning
}
criterion_main!(benches);
