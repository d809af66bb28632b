#![allow(dead_code)]

use std::collections::HashSet;

use g2v_core::query::BevGrid;
use g2v_core::render::project_gaussian_2d;
use g2v_core::{CameraModel, GaussianSet, VoxelGridSpec};
use nalgebra::{Matrix2, Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};

/// Σ from (w, x, y, z) and per-axis std-dev via nalgebra's quaternion type.
pub fn covariance(q: [f64; 4], s: [f64; 3]) -> Matrix3<f64> {
    let r = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner();
    r * Matrix3::from_diagonal(&Vector3::new(s[0] * s[0], s[1] * s[1], s[2] * s[2])) * r.transpose()
}

pub struct OracleGrid {
    pub density: Vec<f64>,
    pub features: Vec<f64>,
    /// `Σ_g w |f_g|` per channel over `S_v`: the magnitude scale of `G_v`
    pub magnitude: Vec<f64>,
}

/// Literal per-voxel sum over every Gaussian, truncated at the Mahalanobis
/// radius.
pub fn oracle_forward(set: &GaussianSet, spec: &VoxelGridSpec, radius: f64) -> OracleGrid {
    let c = set.feature_dim();
    let inv: Vec<Matrix3<f64>> = (0..set.len())
        .map(|g| covariance(set.quat(g), set.scale(g)).try_inverse().unwrap())
        .collect();
    let nv = spec.num_voxels();
    let mut density = vec![0.0; nv];
    let mut features = vec![0.0; nv * c];
    let mut magnitude = vec![0.0; nv * c];
    for v in 0..nv {
        let [ix, iy, iz] = spec.unravel(v);
        let x = Vector3::new(
            spec.origin[0] + spec.voxel_size * (ix as f64 + 0.5),
            spec.origin[1] + spec.voxel_size * (iy as f64 + 0.5),
            spec.origin[2] + spec.voxel_size * (iz as f64 + 0.5),
        );
        for g in 0..set.len() {
            let d = x - set.mean(g);
            let m = d.dot(&(inv[g] * d));
            if m <= radius * radius {
                let w = set.opacity(g) * (-0.5 * m).exp();
                density[v] += w;
                for k in 0..c {
                    features[v * c + k] += w * set.feature(g)[k];
                    magnitude[v * c + k] += w * set.feature(g)[k].abs();
                }
            }
        }
        let s = density[v].max(1e-6);
        for k in 0..c {
            features[v * c + k] /= s;
            magnitude[v * c + k] /= s;
        }
    }
    OracleGrid {
        density,
        features,
        magnitude,
    }
}

pub fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
        .install(f)
}

/// `|a - b| ≤ tol · max(|a|, |b|)`
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub struct OracleGrad {
    pub d_mean: Vec<Vector3<f64>>,
    pub d_cov: Vec<Matrix3<f64>>,
    pub d_opacity: Vec<f64>,
    pub d_feature: Vec<f64>,
}

/// Literal per-(Gaussian, voxel) transcription of the backward formulas,
/// with the opacity gradient in its `Σ s·w / α` form (so `α > 0` only).
pub fn oracle_backward(set: &GaussianSet, spec: &VoxelGridSpec, radius: f64, upstream: &[f64]) -> OracleGrad {
    let fw = oracle_forward(set, spec, radius);
    let c = set.feature_dim();
    let n = set.len();
    let mut out = OracleGrad {
        d_mean: vec![Vector3::zeros(); n],
        d_cov: vec![Matrix3::zeros(); n],
        d_opacity: vec![0.0; n],
        d_feature: vec![0.0; n * c],
    };
    for g in 0..n {
        let inv = covariance(set.quat(g), set.scale(g)).try_inverse().unwrap();
        for v in 0..spec.num_voxels() {
            let x = spec.voxel_center(spec.unravel(v)).unwrap();
            let d = x - set.mean(g);
            let m = d.dot(&(inv * d));
            if m > radius * radius {
                continue;
            }
            let w = set.opacity(g) * (-0.5 * m).exp();
            let f = fw.density[v];
            let s_v = f.max(1e-6);
            let up = &upstream[v * c..(v + 1) * c];
            let gv = &fw.features[v * c..(v + 1) * c];
            let fg = set.feature(g);
            let s: f64 = if f > 1e-6 {
                (0..c).map(|k| up[k] * (fg[k] - gv[k]) / s_v).sum()
            } else {
                (0..c).map(|k| up[k] * fg[k] / 1e-6).sum()
            };
            for k in 0..c {
                out.d_feature[g * c + k] += w / s_v * up[k];
            }
            out.d_mean[g] += s * w * inv * d;
            out.d_opacity[g] += s * w / set.opacity(g);
            out.d_cov[g] += 0.5 * s * w * inv * d * d.transpose() * inv;
        }
    }
    out
}

/// Product-form compositor: for each pixel, contributions sorted by depth,
/// weight_i = α_i' · Π_{j<i} (1 − α_j'), stopping after the contribution
/// that drives the running product below 1e-4.
pub fn literal_composite(set: &GaussianSet, cam: &CameraModel, x: usize, y: usize) -> (Vec<f64>, f64, f64, Vec<f64>) {
    let c = set.feature_dim();
    let mut items: Vec<(f64, f64, usize)> = Vec::new();
    for g in 0..set.len() {
        let ig = project_gaussian_2d(&set.get(g), cam).unwrap();
        if !(ig.depth > 0.0) || set.opacity(g) == 0.0 {
            continue;
        }
        let inv: Matrix2<f64> = ig.cov.try_inverse().unwrap();
        let delta = Vector2::new(x as f64 - ig.pixel[0], y as f64 - ig.pixel[1]);
        let m = delta.dot(&(inv * delta));
        let inside_box = delta[0].abs() <= 3.0 * ig.cov[(0, 0)].sqrt() && delta[1].abs() <= 3.0 * ig.cov[(1, 1)].sqrt();
        if m <= 9.0 && inside_box {
            items.push((ig.depth, set.opacity(g) * (-0.5 * m).exp(), g));
        }
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut f = vec![0.0; c];
    let (mut d, mut a) = (0.0, 0.0);
    let mut weights = Vec::new();
    for i in 0..items.len() {
        let prefix: f64 = items[..i].iter().map(|it| 1.0 - it.1).product();
        if prefix < 1e-4 {
            break;
        }
        let w = items[i].1 * prefix;
        weights.push(w);
        for k in 0..c {
            f[k] += w * set.feature(items[i].2)[k];
        }
        d += w * items[i].0;
        a += w;
    }
    (f, d, a, weights)
}

/// IoU by set algebra on voxel index sets.
pub fn set_iou(a: &HashSet<usize>, b: &HashSet<usize>) -> Option<f64> {
    let union = a.union(b).count();
    (union > 0).then(|| a.intersection(b).count() as f64 / union as f64)
}

/// Heading and footprint test transcribed independently: brute force over
/// every cell of the grid.
pub fn oracle_collision(grid: &BevGrid, path: &[[f64; 2]], t: usize, len: f64, wid: f64) -> bool {
    let dir = |a: [f64; 2], b: [f64; 2]| [b[0] - a[0], b[1] - a[1]];
    let mut h = [1.0, 0.0];
    if t + 1 < path.len() && dir(path[t], path[t + 1]) != [0.0, 0.0] {
        h = dir(path[t], path[t + 1]);
    } else if t > 0 && dir(path[t - 1], path[t]) != [0.0, 0.0] {
        h = dir(path[t - 1], path[t]);
    }
    let angle = h[1].atan2(h[0]);
    let (u, n) = ([angle.cos(), angle.sin()], [-angle.sin(), angle.cos()]);
    for j in 0..grid.dims[1] {
        for i in 0..grid.dims[0] {
            if !grid.occupied[j * grid.dims[0] + i] {
                continue;
            }
            let c = [
                grid.origin[0] + (i as f64 + 0.5) * grid.cell_size,
                grid.origin[1] + (j as f64 + 0.5) * grid.cell_size,
            ];
            let d = [c[0] - path[t][0], c[1] - path[t][1]];
            if (d[0] * u[0] + d[1] * u[1]).abs() <= len / 2.0 && (d[0] * n[0] + d[1] * n[1]).abs() <= wid / 2.0 {
                return true;
            }
        }
    }
    false
}
