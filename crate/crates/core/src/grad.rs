//! Analytic backward pass of the Gaussian-to-voxel splat.
//!
//! Given the upstream gradient `Ḡ_v = ∂L/∂G_v`, the sensitivity of the loss
//! to one density contribution is
//!
//! ```text
//! s_gv = Ḡ_v · (f_g - G_v) / S_v     if F_v > ε
//! s_gv = Ḡ_v · f_g / ε               otherwise
//! ```
//!
//! and, with `d = x_v - μ_g`, `φ = exp(-½ dᵀ Σ⁻¹ d)`, `w = α φ`:
//!
//! ```text
//! ∂L/∂f_g = Σ_v (w / S_v) Ḡ_v
//! ∂L/∂μ_g = Σ_v s_gv w Σ⁻¹ d
//! ∂L/∂α_g = Σ_v s_gv φ
//! ∂L/∂Σ_g = ½ Σ_v s_gv w Σ⁻¹ d dᵀ Σ⁻¹
//! ```
//!
//! The opacity gradient is accumulated from `φ`, not `w / α`, so it stays
//! defined at `α = 0`. Each Gaussian is handled by one worker that walks its
//! own Gaussian→Tile row, so no output is shared between workers.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::binning::{tile_voxel_range_unchecked, DualCsr};
use crate::error::{Error, Result};
use crate::geometry::mahalanobis_sq;
use crate::prepared::PreparedGaussians;
use crate::splat::{axis_centers, axpy, SplatOutput, EPSILON};
use crate::types::{GaussianSet, VoxelGridSpec};

/// Per-Gaussian parameter gradients. `d_cov` rows are symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffers {
    pub feature_dim: usize,
    pub d_mean: Vec<[f64; 3]>,
    pub d_cov: Vec<Matrix3<f64>>,
    pub d_opacity: Vec<f64>,
    pub d_feature: Vec<f64>,
}

impl GradientBuffers {
    pub fn zeros(n: usize, feature_dim: usize) -> Self {
        GradientBuffers {
            feature_dim,
            d_mean: vec![[0.0; 3]; n],
            d_cov: vec![Matrix3::zeros(); n],
            d_opacity: vec![0.0; n],
            d_feature: vec![0.0; n * feature_dim],
        }
    }

    pub fn len(&self) -> usize {
        self.d_opacity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_opacity.is_empty()
    }

    pub fn feature_grad(&self, g: usize) -> &[f64] {
        &self.d_feature[g * self.feature_dim..(g + 1) * self.feature_dim]
    }

    /// All entries flattened per parameter group: mean, covariance, opacity,
    /// feature.
    pub fn groups(&self) -> [(&'static str, Vec<f64>); 4] {
        [
            ("mean", self.d_mean.iter().flatten().copied().collect()),
            (
                "covariance",
                self.d_cov.iter().flat_map(|m| m.iter().copied()).collect(),
            ),
            ("opacity", self.d_opacity.clone()),
            ("feature", self.d_feature.clone()),
        ]
    }

    /// Largest per-group normwise relative difference
    /// `max|a - b| / max|b|` (absolute when `b` is all zero).
    pub fn max_relative_diff(&self, reference: &GradientBuffers) -> f64 {
        self.groups()
            .iter()
            .zip(reference.groups().iter())
            .map(|((_, a), (_, b))| {
                let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let diff = a
                    .iter()
                    .zip(b)
                    .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                if scale > 0.0 {
                    diff / scale
                } else {
                    diff
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.groups().iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }
}

/// Scalar loss whose differential the backward pass computes:
/// `L = Σ_v ⟨Ḡ_v, G_v⟩`. Any loss on voxel features enters the backward pass
/// only through `Ḡ_v`, so a harness can differentiate this linear form and
/// obtain exactly what the kernel returns.
pub fn upstream_loss(forward: &SplatOutput, upstream: &[f64]) -> f64 {
    forward
        .features()
        .iter()
        .zip(upstream)
        .map(|(g, u)| g * u)
        .sum()
}

pub fn splat_backward(
    set: &GaussianSet,
    csr: &DualCsr,
    spec: &VoxelGridSpec,
    forward: &SplatOutput,
    upstream: &[f64],
) -> Result<GradientBuffers> {
    splat_backward_prepared(&PreparedGaussians::from_set(set)?, csr, spec, forward, upstream)
}

pub fn splat_backward_prepared(
    prep: &PreparedGaussians,
    csr: &DualCsr,
    spec: &VoxelGridSpec,
    forward: &SplatOutput,
    upstream: &[f64],
) -> Result<GradientBuffers> {
    let c = prep.feature_dim();
    let nv = spec.num_voxels();
    if upstream.len() != nv * c {
        return Err(Error::shape(format!(
            "upstream has {} entries, grid needs {}",
            upstream.len(),
            nv * c
        )));
    }
    if forward.grid.spec != *spec
        || forward.grid.feature_dim != c
        || forward.denominators.len() != nv
        || forward.features().len() != nv * c
    {
        return Err(Error::shape("forward output does not match grid and set"));
    }
    if csr.num_gaussians() != prep.len() || csr.num_tiles() != spec.num_tiles() {
        return Err(Error::shape("csr does not match grid and set"));
    }
    if csr.g2t_indices().iter().any(|&t| t as usize >= spec.num_tiles()) {
        return Err(Error::OutOfRange("csr tile index out of range".into()));
    }
    let centers = axis_centers(spec);
    let rows: Vec<GaussianGrad> = (0..prep.len())
        .into_par_iter()
        .map(|g| gaussian_gradient(prep, csr, spec, &centers, forward, upstream, g))
        .collect();

    let mut out = GradientBuffers::zeros(prep.len(), c);
    for (g, row) in rows.into_iter().enumerate() {
        out.d_mean[g] = [row.d_mean[0], row.d_mean[1], row.d_mean[2]];
        out.d_cov[g] = row.d_cov;
        out.d_opacity[g] = row.d_opacity;
        out.d_feature[g * c..(g + 1) * c].copy_from_slice(&row.d_feature);
    }
    Ok(out)
}

struct GaussianGrad {
    d_mean: Vector3<f64>,
    d_cov: Matrix3<f64>,
    d_opacity: f64,
    d_feature: Vec<f64>,
}

fn gaussian_gradient(
    prep: &PreparedGaussians,
    csr: &DualCsr,
    spec: &VoxelGridSpec,
    centers: &[Vec<f64>; 3],
    forward: &SplatOutput,
    upstream: &[f64],
    g: usize,
) -> GaussianGrad {
    let c = prep.feature_dim();
    let r2 = csr.radius_sigmas() * csr.radius_sigmas();
    let mu = prep.mean(g);
    let inv = prep.cov(g).inverse();
    let alpha = prep.opacity(g);
    let fg = prep.feature(g);
    let density = forward.density();
    let feats = forward.features();

    let mut d_mean = Vector3::zeros();
    // ½ Σ s w u uᵀ, accumulated as the upper triangle
    let mut outer = [0.0f64; 6];
    let mut d_opacity = 0.0;
    let mut d_feature = vec![0.0; c];

    for &tile in csr.tiles_of(g) {
        let range = tile_voxel_range_unchecked(spec, tile as usize);
        for iz in range.lo[2]..range.hi[2] {
            for iy in range.lo[1]..range.hi[1] {
                for ix in range.lo[0]..range.hi[0] {
                    let d = Vector3::new(
                        centers[0][ix] - mu[0],
                        centers[1][iy] - mu[1],
                        centers[2][iz] - mu[2],
                    );
                    let m = mahalanobis_sq(inv, &d);
                    if m > r2 {
                        continue;
                    }
                    let v = spec.linear_index(ix, iy, iz);
                    let phi = (-0.5 * m).exp();
                    let w = alpha * phi;
                    let s_v = forward.denominators[v];
                    let up = &upstream[v * c..(v + 1) * c];

                    axpy(&mut d_feature, w / s_v, up);

                    let s = if density[v] > EPSILON {
                        let gv = &feats[v * c..(v + 1) * c];
                        let mut acc = 0.0;
                        for k in 0..c {
                            acc += up[k] * (fg[k] - gv[k]);
                        }
                        acc / s_v
                    } else {
                        let mut acc = 0.0;
                        for k in 0..c {
                            acc += up[k] * fg[k];
                        }
                        acc / EPSILON
                    };

                    d_opacity += s * phi;
                    let u = inv * d;
                    let sw = s * w;
                    d_mean += sw * u;
                    let h = 0.5 * sw;
                    outer[0] += h * u[0] * u[0];
                    outer[1] += h * u[0] * u[1];
                    outer[2] += h * u[0] * u[2];
                    outer[3] += h * u[1] * u[1];
                    outer[4] += h * u[1] * u[2];
                    outer[5] += h * u[2] * u[2];
                }
            }
        }
    }
    let [a, b, cc, d, e, f] = outer;
    GaussianGrad {
        d_mean,
        d_cov: Matrix3::new(a, b, cc, b, d, e, cc, e, f),
        d_opacity,
        d_feature,
    }
}
