//! All-pairs reference kernels. Every voxel visits every Gaussian (forward)
//! and every Gaussian visits every voxel (backward), with no binning. They
//! share the support rule and accumulator formulas with the tiled kernels
//! but none of the indexing, and serve as the oracle and benchmark baseline.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grad::GradientBuffers;
use crate::prepared::PreparedGaussians;
use crate::splat::{SplatOutput, EPSILON};
use crate::types::{VoxelGrid, VoxelGridSpec};

fn center(spec: &VoxelGridSpec, v: usize) -> Vector3<f64> {
    let [ix, iy, iz] = spec.unravel(v);
    Vector3::new(
        spec.origin[0] + (ix as f64 + 0.5) * spec.voxel_size,
        spec.origin[1] + (iy as f64 + 0.5) * spec.voxel_size,
        spec.origin[2] + (iz as f64 + 0.5) * spec.voxel_size,
    )
}

#[inline(always)]
fn quad(inv: &Matrix3<f64>, d: &Vector3<f64>) -> f64 {
    let (x, y, z) = (d[0], d[1], d[2]);
    inv[(0, 0)] * x * x
        + inv[(1, 1)] * y * y
        + inv[(2, 2)] * z * z
        + 2.0 * (inv[(0, 1)] * x * y + inv[(0, 2)] * x * z + inv[(1, 2)] * y * z)
}

/// `(F_v, S_v, G_v)` for one voxel summed over all Gaussians in ID order.
pub fn voxel_accumulate(
    prep: &PreparedGaussians,
    spec: &VoxelGridSpec,
    radius_sigmas: f64,
    v: usize,
) -> (f64, f64, Vec<f64>) {
    let c = prep.feature_dim();
    let x = center(spec, v);
    let r2 = radius_sigmas * radius_sigmas;
    let mut f = 0.0;
    let mut n = vec![0.0; c];
    for g in 0..prep.len() {
        let d = x - prep.mean(g);
        let m = quad(prep.cov(g).inverse(), &d);
        if m <= r2 {
            let w = prep.opacity(g) * (-0.5 * m).exp();
            f += w;
            for (acc, fg) in n.iter_mut().zip(prep.feature(g)) {
                *acc += w * fg;
            }
        }
    }
    let s = f.max(EPSILON);
    for acc in n.iter_mut() {
        *acc /= s;
    }
    (f, s, n)
}

/// Full-grid all-pairs forward.
pub fn splat_forward(
    prep: &PreparedGaussians,
    spec: &VoxelGridSpec,
    radius_sigmas: f64,
) -> SplatOutput {
    let c = prep.feature_dim();
    let rows: Vec<(f64, f64, Vec<f64>)> = (0..spec.num_voxels())
        .into_par_iter()
        .map(|v| voxel_accumulate(prep, spec, radius_sigmas, v))
        .collect();
    let mut density = Vec::with_capacity(rows.len());
    let mut denominators = Vec::with_capacity(rows.len());
    let mut features = Vec::with_capacity(rows.len() * c);
    for (f, s, g) in rows {
        density.push(f);
        denominators.push(s);
        features.extend_from_slice(&g);
    }
    SplatOutput {
        grid: VoxelGrid {
            spec: *spec,
            feature_dim: c,
            density,
            features: Some(features),
            occupancy: None,
        },
        denominators,
    }
}

/// Forward restricted to `voxels` (for sampled timing and spot checks).
pub fn splat_forward_voxels(
    prep: &PreparedGaussians,
    spec: &VoxelGridSpec,
    radius_sigmas: f64,
    voxels: &[usize],
) -> Vec<(f64, f64, Vec<f64>)> {
    voxels
        .par_iter()
        .map(|&v| voxel_accumulate(prep, spec, radius_sigmas, v))
        .collect()
}

/// Gradient of `Σ_v ⟨Ḡ_v, G_v⟩` with respect to Gaussian `g`, visiting every
/// voxel of the grid.
pub fn gaussian_gradient(
    prep: &PreparedGaussians,
    spec: &VoxelGridSpec,
    radius_sigmas: f64,
    forward: &SplatOutput,
    upstream: &[f64],
    g: usize,
) -> ([f64; 3], Matrix3<f64>, f64, Vec<f64>) {
    let c = prep.feature_dim();
    let r2 = radius_sigmas * radius_sigmas;
    let mu = prep.mean(g);
    let inv = prep.cov(g).inverse();
    let alpha = prep.opacity(g);
    let fg = prep.feature(g);
    let mut d_mean = Vector3::zeros();
    let mut d_cov = Matrix3::zeros();
    let mut d_opacity = 0.0;
    let mut d_feature = vec![0.0; c];
    let mut v = 0;
    for iz in 0..spec.dims[2] {
        let cz = spec.origin[2] + (iz as f64 + 0.5) * spec.voxel_size;
        for iy in 0..spec.dims[1] {
            let cy = spec.origin[1] + (iy as f64 + 0.5) * spec.voxel_size;
            for ix in 0..spec.dims[0] {
                let cx = spec.origin[0] + (ix as f64 + 0.5) * spec.voxel_size;
                let d = Vector3::new(cx - mu[0], cy - mu[1], cz - mu[2]);
                let m = quad(inv, &d);
                if m <= r2 {
                    let acc = (&mut d_mean, &mut d_cov, &mut d_opacity, &mut d_feature[..]);
                    accumulate_voxel(v, d, m, alpha, inv, fg, forward, upstream, acc);
                }
                v += 1;
            }
        }
    }
    ([d_mean[0], d_mean[1], d_mean[2]], d_cov, d_opacity, d_feature)
}

type Accumulators<'a> = (
    &'a mut Vector3<f64>,
    &'a mut Matrix3<f64>,
    &'a mut f64,
    &'a mut [f64],
);

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn accumulate_voxel(
    v: usize,
    d: Vector3<f64>,
    m: f64,
    alpha: f64,
    inv: &Matrix3<f64>,
    fg: &[f64],
    forward: &SplatOutput,
    upstream: &[f64],
    (d_mean, d_cov, d_opacity, d_feature): Accumulators<'_>,
) {
    let c = fg.len();
    let phi = (-0.5 * m).exp();
    let w = alpha * phi;
    let big_f = forward.grid.density[v];
    let s_v = forward.denominators[v];
    let gv = forward.feature_row(v);
    let up = &upstream[v * c..(v + 1) * c];
    let mut s = 0.0;
    for k in 0..c {
        d_feature[k] += w / s_v * up[k];
        s += if big_f > EPSILON {
            up[k] * (fg[k] - gv[k]) / s_v
        } else {
            up[k] * fg[k] / EPSILON
        };
    }
    let u = inv * d;
    *d_opacity += s * phi;
    *d_mean += s * w * u;
    *d_cov += 0.5 * s * w * (u * u.transpose());
}

/// Full all-pairs backward.
pub fn splat_backward(
    prep: &PreparedGaussians,
    spec: &VoxelGridSpec,
    radius_sigmas: f64,
    forward: &SplatOutput,
    upstream: &[f64],
) -> Result<GradientBuffers> {
    let all: Vec<usize> = (0..prep.len()).collect();
    splat_backward_gaussians(prep, spec, radius_sigmas, forward, upstream, &all)
}

/// Backward restricted to the Gaussians in `subset`; rows are returned in
/// `subset` order.
pub fn splat_backward_gaussians(
    prep: &PreparedGaussians,
    spec: &VoxelGridSpec,
    radius_sigmas: f64,
    forward: &SplatOutput,
    upstream: &[f64],
    subset: &[usize],
) -> Result<GradientBuffers> {
    let c = prep.feature_dim();
    if upstream.len() != spec.num_voxels() * c {
        return Err(Error::shape("upstream gradient does not match grid"));
    }
    let rows: Vec<_> = subset
        .par_iter()
        .map(|&g| gaussian_gradient(prep, spec, radius_sigmas, forward, upstream, g))
        .collect();
    let mut out = GradientBuffers::zeros(subset.len(), c);
    for (i, (dm, dc, da, df)) in rows.into_iter().enumerate() {
        out.d_mean[i] = dm;
        out.d_cov[i] = dc;
        out.d_opacity[i] = da;
        out.d_feature[i * c..(i + 1) * c].copy_from_slice(&df);
    }
    Ok(out)
}
