//! Generators and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use alcpp::spunet::Tensor5;
use alcpp::{LandmarkSet, Vec3};
use nalgebra::{Rotation3, Unit, UnitQuaternion, Vector4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| gaussian(rng));
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

/// Uniformly distributed rotation.
pub fn rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
    let q = Vector4::from_fn(|_, _| gaussian(rng));
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::from_vector(q)).to_rotation_matrix()
}

/// Landmarks scattered around a random anatomical frame, with the left
/// pedicle points on the +Y side and the right ones on the -Y side, so
/// both frame fitting and planning succeed.
pub fn landmark_set(rng: &mut ChaCha8Rng) -> LandmarkSet {
    let b = Vec3::from_fn(|_, _| rng.gen_range(-100.0..100.0));
    let z = unit_vector(rng);
    let y = {
        let t = unit_vector(rng);
        (t - z * t.dot(&z)).normalize()
    };
    let x = y.cross(&z);
    let mut at = |fx: (f64, f64), fy: (f64, f64), fz: (f64, f64)| {
        b + x * rng.gen_range(fx.0..fx.1) + y * rng.gen_range(fy.0..fy.1) + z * rng.gen_range(fz.0..fz.1)
    };
    let a = at((-3.0, 3.0), (-3.0, 3.0), (-50.0, -15.0));
    let c = at((-3.0, 3.0), (4.0, 20.0), (2.0, 15.0));
    let d = at((-8.0, -2.0), (6.0, 25.0), (2.0, 15.0));
    let e = at((-8.0, -2.0), (-25.0, -6.0), (2.0, 15.0));
    let f = at((-3.0, 3.0), (-20.0, -4.0), (2.0, 15.0));
    let g = at((-20.0, -12.0), (-2.0, 2.0), (-5.0, 0.0));
    LandmarkSet::new([a, b, c, d, e, f, g]).unwrap()
}

pub fn rigid(lm: &LandmarkSet, r: &Rotation3<f64>, t: Vec3) -> LandmarkSet {
    lm.map(|_, p| r * p + t).unwrap()
}

pub fn axis_rotation(axis: Vec3, angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle)
}

/// Direct seven-loop 3D convolution with zero "same" padding, accumulated in f64.
pub fn conv3d_reference(t: &Tensor5, weight: &[f32], bias: &[f32], shape: [usize; 5]) -> Vec<f64> {
    let [b, ci, nz, ny, nx] = t.shape();
    let [co, wci, k, _, _] = shape;
    assert_eq!(ci, wci);
    let pad = (k / 2) as isize;
    let mut out = vec![0.0f64; b * co * nz * ny * nx];
    let mut i = 0;
    for bi in 0..b {
        for o in 0..co {
            for z in 0..nz {
                for y in 0..ny {
                    for x in 0..nx {
                        let mut acc = bias[o] as f64;
                        for c in 0..ci {
                            for dz in 0..k {
                                for dy in 0..k {
                                    for dx in 0..k {
                                        let sz = z as isize + dz as isize - pad;
                                        let sy = y as isize + dy as isize - pad;
                                        let sx = x as isize + dx as isize - pad;
                                        if sz < 0 || sy < 0 || sx < 0 {
                                            continue;
                                        }
                                        let (sz, sy, sx) = (sz as usize, sy as usize, sx as usize);
                                        if sz >= nz || sy >= ny || sx >= nx {
                                            continue;
                                        }
                                        let w = weight[(((o * ci + c) * k + dz) * k + dy) * k + dx];
                                        acc += w as f64 * t.get(bi, c, sz, sy, sx) as f64;
                                    }
                                }
                            }
                        }
                        out[i] = acc;
                        i += 1;
                    }
                }
            }
        }
    }
    out
}

/// Largest deviation relative to the largest reference magnitude.
pub fn max_relative_error(got: &[f32], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    got.iter()
        .zip(want)
        .map(|(&g, &w)| (g as f64 - w).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Mean and sample standard deviation via the textbook two-pass formula.
pub fn two_pass_mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 5]) -> Tensor5 {
    let n = shape.iter().product();
    Tensor5::new(shape, (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}
