mod common;

use common::{oracle_forward, rel_close, with_threads};
use g2v_core::synth::{random_scene, SceneConfig};
use g2v_core::{build_dual_csr, naive, splat_bev_forward, splat_forward, Gaussian, GaussianSet, PreparedGaussians, VoxelGridSpec};
use proptest::prelude::*;

fn scene(seed: u64, n: usize, dims: usize, c: usize, outside: usize) -> (GaussianSet, VoxelGridSpec) {
    let spec = VoxelGridSpec::new([-1.0, 0.5, 2.0], [dims; 3], 0.25).unwrap();
    let cfg = SceneConfig {
        outside,
        ..SceneConfig::new(n, c)
    };
    (random_scene(seed, &spec, &cfg).unwrap(), spec)
}

#[test]
fn tiled_matches_literal_oracle() {
    for (seed, n, dims, c, outside) in [(1, 10, 8, 4, 0), (2, 100, 12, 16, 10), (3, 300, 16, 3, 40)] {
        let (set, spec) = scene(seed, n, dims, c, outside);
        let csr = build_dual_csr(&set, &spec, 3.0).unwrap();
        let out = splat_forward(&set, &csr, &spec).unwrap();
        let oracle = oracle_forward(&set, &spec, 3.0);
        for v in 0..spec.num_voxels() {
            assert!(
                rel_close(out.density()[v], oracle.density[v], 1e-12),
                "seed {seed} voxel {v}: {} vs {}",
                out.density()[v],
                oracle.density[v]
            );
            for k in 0..c {
                let (a, b) = (out.features()[v * c + k], oracle.features[v * c + k]);
                assert!((a - b).abs() <= 1e-12 * oracle.magnitude[v * c + k], "seed {seed} voxel {v} ch {k}");
            }
        }
    }
}

#[test]
fn tiled_and_all_pairs_are_bit_identical() {
    let (set, spec) = scene(9, 200, 16, 8, 20);
    let csr = build_dual_csr(&set, &spec, 3.0).unwrap();
    let tiled = splat_forward(&set, &csr, &spec).unwrap();
    let prep = PreparedGaussians::from_set(&set).unwrap();
    let all = naive::splat_forward(&prep, &spec, 3.0);
    assert_eq!(tiled.grid, all.grid);
    assert_eq!(tiled.denominators, all.denominators);
}

#[test]
fn gaussian_centered_outside_still_contributes() {
    let spec = VoxelGridSpec::new([0.0; 3], [8, 8, 8], 1.0).unwrap();
    let g = Gaussian::isotropic([-0.5, 3.5, 3.5], 0.8, 1.0, vec![1.0]);
    let set = GaussianSet::from_gaussians(1, [g]).unwrap();
    let csr = build_dual_csr(&set, &spec, 3.0).unwrap();
    let out = splat_forward(&set, &csr, &spec).unwrap();
    let v = spec.linear_index(0, 3, 3);
    let expected = (-0.5f64 * 1.0 / 0.64).exp();
    assert!(rel_close(out.density()[v], expected, 1e-15));
    assert!(out.density().iter().filter(|&&f| f > 0.0).count() > 1);
}

#[test]
fn bit_identical_across_worker_counts() {
    let (set, spec) = scene(4, 150, 16, 6, 10);
    let run = || {
        let csr = build_dual_csr(&set, &spec, 3.0).unwrap();
        (csr.clone(), splat_forward(&set, &csr, &spec).unwrap())
    };
    let one = with_threads(1, run);
    for n in [2, 3, 8] {
        let other = with_threads(n, run);
        assert_eq!(one.0, other.0, "csr differs at {n} threads");
        assert_eq!(one.1.grid, other.1.grid, "grid differs at {n} threads");
    }
}

#[test]
fn bev_matches_flattened_oracle() {
    let spec = VoxelGridSpec::new([0.0, 0.0, -2.0], [12, 10, 6], 0.5).unwrap();
    let (set, _) = scene(12, 40, 8, 3, 0);
    let bev = splat_bev_forward(&set, &spec, 3.0).unwrap();
    // oracle: 2D marginal evaluated at cell centers
    let c = set.feature_dim();
    for j in 0..10 {
        for i in 0..12 {
            let x = nalgebra::Vector2::new(0.25 + 0.5 * i as f64, 0.25 + 0.5 * j as f64);
            let mut f = 0.0;
            let mut n = vec![0.0; c];
            for g in 0..set.len() {
                let sigma = common::covariance(set.quat(g), set.scale(g));
                let inv = sigma.fixed_view::<2, 2>(0, 0).into_owned().try_inverse().unwrap();
                let d = x - set.mean(g).xy();
                let m = d.dot(&(inv * d));
                if m <= 9.0 {
                    let w = set.opacity(g) * (-0.5 * m).exp();
                    f += w;
                    for k in 0..c {
                        n[k] += w * set.feature(g)[k];
                    }
                }
            }
            let v = j * 12 + i;
            assert!((bev.density()[v] - f).abs() <= 1e-12 * f.max(1e-300), "cell {i},{j}");
            for k in 0..c {
                let g = n[k] / f.max(1e-6);
                assert!((bev.features()[v * c + k] - g).abs() <= 1e-11 * (1.0 + g.abs()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn features_are_convex_combinations(seed in 0u64..10_000, n in 1usize..40) {
        let (set, spec) = scene(seed, n, 8, 3, n / 4);
        let csr = build_dual_csr(&set, &spec, 3.0).unwrap();
        let out = splat_forward(&set, &csr, &spec).unwrap();
        let prep = PreparedGaussians::from_set(&set).unwrap();
        for v in 0..spec.num_voxels() {
            if out.density()[v] <= 1e-6 {
                continue;
            }
            let contributors = naive_contributors(&prep, &spec, v);
            for k in 0..3 {
                let lo = contributors.iter().map(|&g| set.feature(g)[k]).fold(f64::INFINITY, f64::min);
                let hi = contributors.iter().map(|&g| set.feature(g)[k]).fold(f64::NEG_INFINITY, f64::max);
                let x = out.feature_row(v)[k];
                prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn permutation_changes_nothing_beyond_rounding(seed in 0u64..10_000) {
        let (set, spec) = scene(seed, 30, 8, 4, 5);
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.reverse();
        order.rotate_left((seed % 30) as usize);
        let shuffled = set.permuted(&order).unwrap();
        let a = splat_forward(&set, &build_dual_csr(&set, &spec, 3.0).unwrap(), &spec).unwrap();
        let b = splat_forward(&shuffled, &build_dual_csr(&shuffled, &spec, 3.0).unwrap(), &spec).unwrap();
        for v in 0..spec.num_voxels() {
            prop_assert!(rel_close(a.density()[v], b.density()[v], 1e-12) || (a.density()[v] - b.density()[v]).abs() < 1e-300);
            for k in 0..4 {
                prop_assert!((a.feature_row(v)[k] - b.feature_row(v)[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn larger_radius_never_drops_pairs(seed in 0u64..10_000, r in 0.5f64..4.0) {
        let (set, spec) = scene(seed, 25, 8, 1, 5);
        let small = build_dual_csr(&set, &spec, r).unwrap();
        let large = build_dual_csr(&set, &spec, r * 1.5).unwrap();
        small.validate().unwrap();
        large.validate().unwrap();
        for g in 0..set.len() {
            for t in small.tiles_of(g) {
                prop_assert!(large.tiles_of(g).contains(t));
            }
        }
    }
}

fn naive_contributors(prep: &PreparedGaussians, spec: &VoxelGridSpec, v: usize) -> Vec<usize> {
    let x = spec.voxel_center(spec.unravel(v)).unwrap();
    (0..prep.len())
        .filter(|&g| prep.cov(g).mahalanobis_sq(&(x - prep.mean(g))) <= 9.0)
        .collect()
}
