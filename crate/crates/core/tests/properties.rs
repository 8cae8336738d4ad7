mod common;

use alcpp::frame::{fit_frame_detailed, PlanMode};
use alcpp::grading::grade_plan;
use alcpp::heatmap::{localization_error, localize, HeatmapStack};
use alcpp::phantom::{generate_phantom, jitter_landmarks, phantom_landmarks, PhantomParams};
use alcpp::spunet::{conv3d, depth_to_space, space_to_depth, ConvWeights};
use alcpp::{fit_frame, plan_planes, Grade, Landmark, Vec3};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
    (a - b).norm() <= tol
}

proptest! {
    #[test]
    fn planes_follow_rigid_motion(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lm = landmark_set(&mut rng);
        let r = rotation(&mut rng);
        let t = Vec3::from_fn(|_, _| rng.gen_range(-200.0..200.0));
        let moved = rigid(&lm, &r, t);
        let (p0, p1) = (plan_planes(&lm, PlanMode::Partial), plan_planes(&moved, PlanMode::Partial));
        prop_assume!(p0.is_ok());
        let (p0, p1) = (p0.unwrap(), p1.unwrap());
        for (a, b) in p0.iter().zip(&p1) {
            prop_assert_eq!(a.name, b.name);
            prop_assert_eq!(a.resect_side, b.resect_side);
            prop_assert!(close(r * a.point + t, b.point, 1e-9));
            prop_assert!(close(r * a.normal, b.normal, 1e-9));
        }
        let (f0, f1) = (fit_frame(&lm).unwrap(), fit_frame(&moved).unwrap());
        prop_assert!(close(r * f0.x, f1.x, 1e-9));
        prop_assert!(close(r * f0.y, f1.y, 1e-9));
        prop_assert!(close(r * f0.z, f1.z, 1e-9));
    }

    #[test]
    fn planes_scale_about_b(seed in any::<u64>(), s in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lm = landmark_set(&mut rng);
        let b = lm.get(Landmark::B);
        let scaled = lm.map(|_, p| b + (p - b) * s).unwrap();
        let p0 = plan_planes(&lm, PlanMode::Partial);
        prop_assume!(p0.is_ok());
        let (p0, p1) = (p0.unwrap(), plan_planes(&scaled, PlanMode::Partial).unwrap());
        let (f0, f1) = (fit_frame(&lm).unwrap(), fit_frame(&scaled).unwrap());
        for (a, c) in p0.iter().zip(&p1) {
            let (ua, uc) = (f0.to_frame(a.point), f1.to_frame(c.point));
            prop_assert!(close(ua * s, uc, 1e-9 * (1.0 + s) * (1.0 + ua.norm())));
            prop_assert!(close(a.normal, c.normal, 1e-9));
        }
    }

    #[test]
    fn normals_lie_in_the_axial_plane(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lm = landmark_set(&mut rng);
        if let Ok(planes) = plan_planes(&lm, PlanMode::Partial) {
            let z = fit_frame(&lm).unwrap().z;
            for p in &planes {
                prop_assert!(p.normal.dot(&z).abs() <= 1e-9);
                prop_assert!((p.normal.norm() - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn grades_ignore_rigid_motion_and_scale(seed in any::<u64>(), sigma in 0.0f64..4.0, s in 0.2f64..5.0) {
        let truth = phantom_landmarks(&PhantomParams::random(seed)).unwrap();
        let noisy = jitter_landmarks(&truth, sigma, seed ^ 0x5eed).unwrap();
        let planes = match plan_planes(&noisy, PlanMode::Partial) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        let base: Vec<Grade> = grade_plan(&planes, &truth, 5.0).unwrap().into_iter().map(|g| g.grade).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rotation(&mut rng);
        let t = Vec3::from_fn(|_, _| rng.gen_range(-50.0..50.0));
        let center = Vec3::from_fn(|_, _| rng.gen_range(-50.0..50.0));
        let moved_truth = truth.map(|_, p| r * (center + (p - center) * s) + t).unwrap();
        let moved: Vec<_> = planes
            .iter()
            .map(|p| {
                let mut q = p.clone();
                q.point = r * (center + (p.point - center) * s) + t;
                q.normal = r * p.normal;
                q
            })
            .collect();
        let after: Vec<Grade> = grade_plan(&moved, &moved_truth, 5.0).unwrap().into_iter().map(|g| g.grade).collect();
        prop_assert_eq!(base, after);
    }

    #[test]
    fn phantom_regions_are_well_formed(seed in any::<u64>()) {
        let lm = phantom_landmarks(&PhantomParams::random(seed)).unwrap();
        let fit = fit_frame_detailed(&lm).unwrap();
        let x_g = fit.frame.to_frame(lm.get(Landmark::G)).x;
        let x_j = fit.frame.to_frame(fit.j()).x;
        prop_assert!(x_g < x_j);
        for g in grade_plan(&plan_planes(&lm, PlanMode::Partial).unwrap(), &lm, 5.0).unwrap() {
            prop_assert_eq!(g.grade, Grade::A);
        }
    }

    #[test]
    fn localization_error_is_a_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = || Vec3::from_fn(|_, _| rng.gen_range(-100.0..100.0));
        let (a, b, c) = (p(), p(), p());
        prop_assert_eq!(localization_error(a, a), 0.0);
        prop_assert!(localization_error(a, b) > 0.0);
        prop_assert_eq!(localization_error(a, b), localization_error(b, a));
        prop_assert!(localization_error(a, c) <= localization_error(a, b) + localization_error(b, c) + 1e-12);
    }

    #[test]
    fn interval_sampling_round_trips(seed in any::<u64>(), b in 1usize..3, c in 1usize..4, z in 1usize..4, y in 1usize..4, x in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&mut rng, [b, c, 2 * z, 2 * y, 2 * x]);
        let merged = space_to_depth(&t, 2).unwrap();
        prop_assert_eq!(merged.shape(), [b, 8 * c, z, y, x]);
        let back = depth_to_space(&merged, 2).unwrap();
        prop_assert_eq!(back.data(), t.data());
        let again = space_to_depth(&back, 2).unwrap();
        prop_assert_eq!(again.data(), merged.data());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conv3d_matches_direct_loops(seed in any::<u64>(), ci in 1usize..4, co in 1usize..4, k in prop::sample::select(vec![1usize, 3, 5])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&mut rng, [1, ci, 8, 8, 8]);
        let shape = [co, ci, k, k, k];
        let weight: Vec<f32> = (0..co * ci * k * k * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias: Vec<f32> = (0..co).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = conv3d(&t, &ConvWeights::new(&weight, &bias, shape).unwrap()).unwrap();
        let want = conv3d_reference(&t, &weight, &bias, shape);
        prop_assert!(max_relative_error(got.data(), &want) <= 1e-5);
    }

    #[test]
    fn rasterized_landmarks_survive_the_heatmap_round_trip(seed in any::<u64>(), sigma in prop::sample::select(vec![1.0f64, 3.0])) {
        let p = PhantomParams { dims: [48, 96, 96], ..PhantomParams::random(seed) };
        let ph = generate_phantom(&p).unwrap();
        let grid = ph.volume.grid().clone();
        let loc = localize(&HeatmapStack::targets(&grid, &ph.landmarks, sigma).unwrap());
        let diagonal = grid.spacing().norm();
        for (pt, (_, truth)) in loc.points.iter().zip(ph.landmarks.iter()) {
            prop_assert!(localization_error(pt.world, truth) <= diagonal);
        }
    }
}
