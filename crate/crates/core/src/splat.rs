//! Forward Gaussian-to-voxel and Gaussian-to-BEV splatting.
//!
//! Per voxel `v` with center `x_v`:
//!
//! ```text
//! w_gv = α_g · exp(-½ (x_v - μ_g)ᵀ Σ_g⁻¹ (x_v - μ_g))     (zero outside the support ellipsoid)
//! F_v  = Σ_g w_gv          N_v = Σ_g w_gv f_g
//! S_v  = max(F_v, ε)       G_v = N_v / S_v               ε = 1e-6
//! ```
//!
//! The support of each Gaussian is its Mahalanobis ellipsoid of radius
//! `csr.radius_sigmas()`; the tile pairing covers it by construction, so the
//! CSR only decides which work is skipped, never the result. Tiles are
//! processed in parallel and each tile walks its Gaussians in ascending ID
//! order, which makes the output independent of the worker count.

use rayon::prelude::*;

use crate::binning::{tile_voxel_range_unchecked, DualCsr, VoxelRange};
use crate::error::{Error, Result};
use crate::geometry::mahalanobis_sq;
use crate::prepared::PreparedGaussians;
use crate::types::{GaussianSet, VoxelGrid, VoxelGridSpec};

/// Clamp for the feature-normalizing denominator.
pub const EPSILON: f64 = 1e-6;

/// Default occupancy threshold.
pub const DEFAULT_TAU: f64 = 0.3;

const TILE_BATCH: usize = 512;

/// Forward result: density `F_v` and features `G_v` in `grid`, plus the
/// clamped denominators `S_v` the backward pass consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatOutput {
    pub grid: VoxelGrid,
    pub denominators: Vec<f64>,
}

impl SplatOutput {
    pub fn density(&self) -> &[f64] {
        &self.grid.density
    }

    pub fn features(&self) -> &[f64] {
        self.grid.features.as_deref().unwrap_or(&[])
    }

    pub fn feature_row(&self, v: usize) -> &[f64] {
        let c = self.grid.feature_dim;
        &self.features()[v * c..(v + 1) * c]
    }
}

/// Voxel center coordinates per axis: `origin + (i + 0.5) · voxel_size`.
pub(crate) fn axis_centers(spec: &VoxelGridSpec) -> [Vec<f64>; 3] {
    std::array::from_fn(|k| {
        (0..spec.dims[k])
            .map(|i| spec.origin[k] + (i as f64 + 0.5) * spec.voxel_size)
            .collect()
    })
}

#[inline(always)]
pub(crate) fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// Accumulates `F` and `N` for the voxels of `range` (x-fastest, local
/// indexing) over `gaussians` in the given order.
pub(crate) fn accumulate_tile(
    prep: &PreparedGaussians,
    gaussians: &[u32],
    range: &VoxelRange,
    centers: &[Vec<f64>; 3],
    radius_sq: f64,
    f_out: &mut [f64],
    n_out: &mut [f64],
) {
    let c = prep.feature_dim();
    for &g in gaussians {
        let g = g as usize;
        let mu = prep.mean(g);
        let inv = prep.cov(g).inverse();
        let alpha = prep.opacity(g);
        let feat = prep.feature(g);
        let mut k = 0;
        for iz in range.lo[2]..range.hi[2] {
            for iy in range.lo[1]..range.hi[1] {
                for ix in range.lo[0]..range.hi[0] {
                    let d = nalgebra::Vector3::new(
                        centers[0][ix] - mu[0],
                        centers[1][iy] - mu[1],
                        centers[2][iz] - mu[2],
                    );
                    let m = mahalanobis_sq(inv, &d);
                    if m <= radius_sq {
                        let w = alpha * (-0.5 * m).exp();
                        f_out[k] += w;
                        axpy(&mut n_out[k * c..(k + 1) * c], w, feat);
                    }
                    k += 1;
                }
            }
        }
    }
}

/// Turns accumulators into `(F, S, G)` in place: `n` becomes `G`.
#[inline]
pub(crate) fn normalize(f: f64, n: &mut [f64]) -> f64 {
    let s = f.max(EPSILON);
    for v in n.iter_mut() {
        *v /= s;
    }
    s
}

fn check_inputs(prep: &PreparedGaussians, csr: &DualCsr, spec: &VoxelGridSpec) -> Result<()> {
    if csr.num_gaussians() != prep.len() {
        return Err(Error::shape(format!(
            "csr built for {} gaussians, set has {}",
            csr.num_gaussians(),
            prep.len()
        )));
    }
    if csr.num_tiles() != spec.num_tiles() {
        return Err(Error::shape(format!(
            "csr built for {} tiles, grid has {}",
            csr.num_tiles(),
            spec.num_tiles()
        )));
    }
    if csr.t2g_indices().iter().any(|&g| g as usize >= prep.len())
        || csr.g2t_indices().iter().any(|&t| t as usize >= spec.num_tiles())
    {
        return Err(Error::OutOfRange("csr pair index out of range".into()));
    }
    Ok(())
}

pub fn splat_forward(set: &GaussianSet, csr: &DualCsr, spec: &VoxelGridSpec) -> Result<SplatOutput> {
    splat_forward_prepared(&PreparedGaussians::from_set(set)?, csr, spec)
}

pub fn splat_forward_prepared(
    prep: &PreparedGaussians,
    csr: &DualCsr,
    spec: &VoxelGridSpec,
) -> Result<SplatOutput> {
    check_inputs(prep, csr, spec)?;
    let c = prep.feature_dim();
    let nv = spec.num_voxels();
    let centers = axis_centers(spec);
    let radius_sq = csr.radius_sigmas() * csr.radius_sigmas();

    let mut density = vec![0.0; nv];
    let mut denominators = vec![EPSILON; nv];
    let mut features = vec![0.0; nv * c];

    let occupied: Vec<usize> = (0..spec.num_tiles())
        .filter(|&t| !csr.gaussians_of(t).is_empty())
        .collect();
    for batch in occupied.chunks(TILE_BATCH) {
        let results: Vec<(VoxelRange, Vec<f64>, Vec<f64>)> = batch
            .par_iter()
            .map(|&t| {
                let range = tile_voxel_range_unchecked(spec, t);
                let mut f = vec![0.0; range.len()];
                let mut n = vec![0.0; range.len() * c];
                accumulate_tile(prep, csr.gaussians_of(t), &range, &centers, radius_sq, &mut f, &mut n);
                (range, f, n)
            })
            .collect();
        for (range, f, mut n) in results {
            for (k, v) in range.voxels(spec).enumerate() {
                let row = &mut n[k * c..(k + 1) * c];
                denominators[v] = normalize(f[k], row);
                density[v] = f[k];
                features[v * c..(v + 1) * c].copy_from_slice(row);
            }
        }
    }

    Ok(SplatOutput {
        grid: VoxelGrid {
            spec: *spec,
            feature_dim: c,
            density,
            features: Some(features),
            occupancy: None,
        },
        denominators,
    })
}

/// Top-down splatting. `bev_spec` may be a 3D spec, in which case its single
/// z layer version ([`VoxelGridSpec::bev`]) is used. Covariances are
/// marginalized over z, so the result does not depend on Gaussian heights.
pub fn splat_bev_forward(
    set: &GaussianSet,
    bev_spec: &VoxelGridSpec,
    radius_sigmas: f64,
) -> Result<SplatOutput> {
    let spec = bev_spec.bev();
    let plane_z = spec.origin[2] + 0.5 * spec.voxel_size;
    let flat = PreparedGaussians::from_set(set)?.marginalized_to_plane(plane_z)?;
    let csr = crate::binning::build_dual_csr_prepared(&flat, &spec, radius_sigmas)?;
    splat_forward_prepared(&flat, &csr, &spec)
}

/// Occupancy head applied to the density field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OccupancyHead {
    /// `o = F_v`
    Identity,
    /// `o = a · logistic(b · F_v)`
    AffineLogistic { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyHeadConfig {
    pub head: OccupancyHead,
    pub tau: f64,
}

impl Default for OccupancyHeadConfig {
    fn default() -> Self {
        OccupancyHeadConfig {
            head: OccupancyHead::Identity,
            tau: DEFAULT_TAU,
        }
    }
}

impl OccupancyHeadConfig {
    pub fn new(head: OccupancyHead, tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau {tau} must be finite")));
        }
        Ok(OccupancyHeadConfig { head, tau })
    }

    pub fn score(&self, density: f64) -> f64 {
        match self.head {
            OccupancyHead::Identity => density,
            OccupancyHead::AffineLogistic { a, b } => a / (1.0 + (-b * density).exp()),
        }
    }
}

/// `mask_v = head(F_v) > τ`.
pub fn occupancy_mask(grid: &VoxelGrid, head: &OccupancyHeadConfig) -> Vec<bool> {
    grid.density.iter().map(|&f| head.score(f) > head.tau).collect()
}

/// Elementwise conjunction of prediction, pseudo label and visibility masks.
pub fn compose_supervision_mask(pred: &[bool], pseudo: &[bool], visibility: &[bool]) -> Result<Vec<bool>> {
    if pred.len() != pseudo.len() || pred.len() != visibility.len() {
        return Err(Error::shape(format!(
            "mask lengths {}, {}, {} differ",
            pred.len(),
            pseudo.len(),
            visibility.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(pseudo)
        .zip(visibility)
        .map(|((a, b), c)| *a && *b && *c)
        .collect())
}

/// `mask × O`: feature rows zeroed where the mask is false.
pub fn masked_features(mask: &[bool], features: &[f64], feature_dim: usize) -> Result<Vec<f64>> {
    if features.len() != mask.len() * feature_dim {
        return Err(Error::shape("feature rows differ from mask length"));
    }
    let mut out = features.to_vec();
    for (row, &keep) in out.chunks_exact_mut(feature_dim.max(1)).zip(mask) {
        if !keep {
            row.fill(0.0);
        }
    }
    Ok(out)
}
