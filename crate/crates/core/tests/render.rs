mod common;

use common::literal_composite as literal;
use g2v_core::render::{project_covariance, render};
use g2v_core::synth::{random_quat, rng};
use g2v_core::{CameraModel, Gaussian, GaussianSet};
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::Rng;

fn cam() -> CameraModel {
    let k = Matrix3::new(60.0, 0.0, 24.0, 0.0, 55.0, 18.0, 0.0, 0.0, 1.0);
    CameraModel::new(k, nalgebra::Matrix4::identity(), 48, 36).unwrap()
}

fn random_set(seed: u64, n: usize, c: usize) -> GaussianSet {
    let mut r = rng(seed);
    let gs: Vec<Gaussian> = (0..n)
        .map(|_| {
            let z = r.random_range(1.5..8.0);
            Gaussian {
                mean: [r.random_range(-0.5..0.5) * z, r.random_range(-0.4..0.4) * z, z],
                quat: random_quat(&mut r),
                scale: std::array::from_fn(|_| r.random_range(0.03..0.3)),
                opacity: r.random_range(0.05..1.0),
                feature: (0..c).map(|_| r.random_range(-1.0..1.0)).collect(),
            }
        })
        .collect();
    GaussianSet::from_gaussians(c, gs).unwrap()
}

#[test]
fn compositor_matches_product_form() {
    for seed in 0..4 {
        let set = random_set(seed, 40, 3);
        let cam = cam();
        let out = render(&set, &cam).unwrap();
        for y in 0..cam.height {
            for x in 0..cam.width {
                let (f, d, a, weights) = literal(&set, &cam, x, y);
                let p = y * cam.width + x;
                for k in 0..3 {
                    assert!((out.feature(x, y)[k] - f[k]).abs() <= 1e-10, "seed {seed} px {x},{y}");
                }
                assert!((out.depth[p] - d).abs() <= 1e-10 * d.max(1.0));
                assert!((out.alpha_sum[p] - a).abs() <= 1e-10);
                assert!(weights.iter().all(|&w| w >= 0.0));
                assert!(weights.iter().sum::<f64>() <= 1.0 + 1e-12);
                assert!(out.alpha_sum[p] <= 1.0 + 1e-12);
            }
        }
    }
}

#[test]
fn two_term_blend() {
    // front α' = 0.5 and back α' = 1 at the principal point
    let cam = cam();
    let front = Gaussian::isotropic([0.0, 0.0, 2.0], 0.05, 0.5, vec![1.0, 0.0]);
    let back = Gaussian::isotropic([0.0, 0.0, 4.0], 0.05, 1.0, vec![0.0, 1.0]);
    let set = GaussianSet::from_gaussians(2, [back, front]).unwrap();
    let out = render(&set, &cam).unwrap();
    assert_eq!(out.feature(24, 18), &[0.5, 0.5]);
    assert_eq!(out.depth[18 * 48 + 24], 0.5 * 2.0 + 0.5 * 4.0);
    assert_eq!(out.alpha_sum[18 * 48 + 24], 1.0);
}

#[test]
fn binary_opacity_shows_nearest_opaque_feature() {
    let cam = cam();
    // on a mean, α' = 1 and the nearest covering opaque Gaussian wins
    let centered = Gaussian::isotropic([0.0, 0.0, 3.0], 0.1, 1.0, vec![7.0, -7.0]);
    let behind = Gaussian::isotropic([0.0, 0.0, 5.0], 0.4, 1.0, vec![1.0, 1.0]);
    let invisible = Gaussian::isotropic([0.0, 0.0, 1.0], 0.4, 0.0, vec![9.0, 9.0]);
    let set = GaussianSet::from_gaussians(2, [behind, invisible, centered]).unwrap();
    assert_eq!(render(&set, &cam).unwrap().feature(24, 18), &[7.0, -7.0]);
}

#[test]
fn zero_opacity_gaussian_changes_nothing() {
    let set = random_set(5, 25, 4);
    let mut gs: Vec<Gaussian> = set.iter().collect();
    let mut ghost = gs[3].clone();
    ghost.opacity = 0.0;
    ghost.mean[2] = 0.7;
    gs.insert(7, ghost);
    let with = GaussianSet::from_gaussians(4, gs).unwrap();
    assert_eq!(render(&set, &cam()).unwrap(), render(&with, &cam()).unwrap());
}

#[test]
fn equal_depth_equal_footprint_permutation() {
    // interchangeable tied Gaussians interleaved with others at distinct depths
    let a = Gaussian::isotropic([0.1, 0.0, 3.0], 0.2, 0.6, vec![1.0, 0.0]);
    let c = Gaussian::isotropic([0.0, 0.1, 5.0], 0.3, 0.4, vec![0.5, 0.5]);
    let d = Gaussian::isotropic([-0.1, 0.05, 2.0], 0.1, 0.3, vec![-1.0, 2.0]);
    let one = render(&GaussianSet::from_gaussians(2, [a.clone(), c.clone(), a.clone(), d.clone()]).unwrap(), &cam()).unwrap();
    let two = render(&GaussianSet::from_gaussians(2, [d, a.clone(), a, c]).unwrap(), &cam()).unwrap();
    for (x, y) in one.features.iter().zip(&two.features) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn depth_ties_composite_in_set_order() {
    let cam = cam();
    let a = Gaussian::isotropic([0.0, 0.0, 3.0], 0.2, 0.5, vec![1.0, 0.0]);
    let b = Gaussian { feature: vec![0.0, 1.0], ..a.clone() };
    let ab = render(&GaussianSet::from_gaussians(2, [a.clone(), b.clone()]).unwrap(), &cam).unwrap();
    let ba = render(&GaussianSet::from_gaussians(2, [b, a]).unwrap(), &cam).unwrap();
    assert_eq!(ab.feature(24, 18), &[0.5, 0.25]);
    assert_eq!(ba.feature(24, 18), &[0.25, 0.5]);
}

#[test]
fn off_axis_covariance_matches_sampled_projection() {
    let cam = cam();
    let mut r = rng(3);
    let mean = Vector3::new(0.8, -0.5, 4.0);
    let q = random_quat(&mut r);
    let s = [0.08, 0.05, 0.12];
    let cov = g2v_core::geometry::covariance_from_quat_scale(q, s).unwrap();
    let ig = project_covariance(&mean, &cov, &cam);
    let l = cov.matrix().cholesky().unwrap().l();
    let k = cam.intrinsics;
    let n = 200_000;
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        // Box–Muller for standard normals
        let z = Vector3::from_fn(|_, _| {
            let u1: f64 = r.random_range(f64::EPSILON..1.0);
            let u2: f64 = r.random();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        });
        let p = mean + l * z;
        let h = k * p;
        pts.push(Vector2::new(h[0] / h[2], h[1] / h[2]));
    }
    let m: Vector2<f64> = pts.iter().sum::<Vector2<f64>>() / n as f64;
    let mut c = Matrix2::zeros();
    for p in &pts {
        c += (p - m) * (p - m).transpose();
    }
    c /= (n - 1) as f64;
    let rel = (c - ig.cov).norm() / ig.cov.norm();
    assert!(rel < 0.1, "relative difference {rel}");
}
