//! Dual-CSR index over Gaussian–tile pairs.
//!
//! A tile is a block of `tile_dims` voxels (4x4x4 by default). Gaussian `g`
//! is paired with every tile whose voxel box intersects its support box,
//! including tiles reached by Gaussians whose mean lies outside the grid.
//! The Gaussian→Tile side drives the backward pass (one worker per
//! Gaussian); the Tile→Gaussian side drives the forward pass (one worker per
//! tile) and is produced by sorting the pair list and run-length encoding it.

use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{gaussian_aabb, Aabb};
use crate::prepared::PreparedGaussians;
use crate::types::{GaussianSet, VoxelGridSpec};

/// Half-open voxel index box `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelRange {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl VoxelRange {
    pub fn len(&self) -> usize {
        (0..3).map(|k| self.hi[k] - self.lo[k]).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear voxel indices in x-fastest order.
    pub fn voxels<'a>(&'a self, spec: &'a VoxelGridSpec) -> impl Iterator<Item = usize> + 'a {
        (self.lo[2]..self.hi[2]).flat_map(move |z| {
            (self.lo[1]..self.hi[1]).flat_map(move |y| {
                (self.lo[0]..self.hi[0]).map(move |x| spec.linear_index(x, y, z))
            })
        })
    }
}

pub fn tile_coords(spec: &VoxelGridSpec, tile_id: usize) -> [usize; 3] {
    let [tx, ty, _] = spec.tile_grid_dims();
    [tile_id % tx, (tile_id / tx) % ty, tile_id / (tx * ty)]
}

/// Voxel range covered by `tile_id`, clipped to the grid at the far edges.
pub fn tile_voxel_range(spec: &VoxelGridSpec, tile_id: usize) -> Result<VoxelRange> {
    if tile_id >= spec.num_tiles() {
        return Err(Error::OutOfRange(format!(
            "tile {tile_id} outside {} tiles",
            spec.num_tiles()
        )));
    }
    Ok(tile_voxel_range_unchecked(spec, tile_id))
}

pub(crate) fn tile_voxel_range_unchecked(spec: &VoxelGridSpec, tile_id: usize) -> VoxelRange {
    let t = tile_coords(spec, tile_id);
    let mut lo = [0; 3];
    let mut hi = [0; 3];
    for k in 0..3 {
        lo[k] = t[k] * spec.tile_dims[k];
        hi[k] = (lo[k] + spec.tile_dims[k]).min(spec.dims[k]);
    }
    VoxelRange { lo, hi }
}

/// World-space box spanned by a tile's voxels.
pub fn tile_aabb(spec: &VoxelGridSpec, tile_id: usize) -> Aabb {
    let r = tile_voxel_range_unchecked(spec, tile_id);
    let corner = |i: [usize; 3]| {
        Vector3::new(
            spec.origin[0] + i[0] as f64 * spec.voxel_size,
            spec.origin[1] + i[1] as f64 * spec.voxel_size,
            spec.origin[2] + i[2] as f64 * spec.voxel_size,
        )
    };
    Aabb {
        min: corner(r.lo),
        max: corner(r.hi),
    }
}

/// Ascending IDs of tiles whose box intersects `aabb`.
pub fn tiles_overlapping(spec: &VoxelGridSpec, aabb: &Aabb) -> Vec<u32> {
    let tdims = spec.tile_grid_dims();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for k in 0..3 {
        let edge = spec.tile_dims[k] as f64 * spec.voxel_size;
        let a = ((aabb.min[k] - spec.origin[k]) / edge).floor() - 1.0;
        let b = ((aabb.max[k] - spec.origin[k]) / edge).floor() + 1.0;
        let last = tdims[k] as f64 - 1.0;
        // candidate window with one tile of slack; the exact test below decides
        if !(b >= 0.0 && a <= last) {
            return Vec::new();
        }
        lo[k] = a.max(0.0) as usize;
        hi[k] = b.min(last) as usize;
    }
    let mut out = Vec::new();
    for tz in lo[2]..=hi[2] {
        for ty in lo[1]..=hi[1] {
            for tx in lo[0]..=hi[0] {
                let id = tx + tdims[0] * (ty + tdims[1] * tz);
                if tile_aabb(spec, id).intersects(aabb) {
                    out.push(id as u32);
                }
            }
        }
    }
    out
}

/// Gaussian→Tile and Tile→Gaussian compressed sparse rows over one pair list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualCsr {
    g2t_indptr: Vec<usize>,
    g2t_indices: Vec<u32>,
    t2g_indptr: Vec<usize>,
    t2g_indices: Vec<u32>,
    radius_sigmas_bits: u64,
}

impl DualCsr {
    pub fn num_gaussians(&self) -> usize {
        self.g2t_indptr.len() - 1
    }

    pub fn num_tiles(&self) -> usize {
        self.t2g_indptr.len() - 1
    }

    pub fn pair_count(&self) -> usize {
        self.g2t_indices.len()
    }

    /// Support radius (in standard deviations) the pairing was built with.
    pub fn radius_sigmas(&self) -> f64 {
        f64::from_bits(self.radius_sigmas_bits)
    }

    pub fn g2t_indptr(&self) -> &[usize] {
        &self.g2t_indptr
    }

    pub fn g2t_indices(&self) -> &[u32] {
        &self.g2t_indices
    }

    pub fn t2g_indptr(&self) -> &[usize] {
        &self.t2g_indptr
    }

    pub fn t2g_indices(&self) -> &[u32] {
        &self.t2g_indices
    }

    #[inline]
    pub fn tiles_of(&self, g: usize) -> &[u32] {
        &self.g2t_indices[self.g2t_indptr[g]..self.g2t_indptr[g + 1]]
    }

    #[inline]
    pub fn gaussians_of(&self, tile: usize) -> &[u32] {
        &self.t2g_indices[self.t2g_indptr[tile]..self.t2g_indptr[tile + 1]]
    }

    /// Checks the structural invariants of both sides and their agreement.
    pub fn validate(&self) -> Result<()> {
        let check_ptr = |ptr: &[usize], name: &str| -> Result<()> {
            if ptr.first() != Some(&0) || ptr.last() != Some(&self.pair_count()) {
                return Err(Error::InvalidArgument(format!("{name} must span [0, pairs]")));
            }
            if ptr.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidArgument(format!("{name} decreases")));
            }
            Ok(())
        };
        check_ptr(&self.g2t_indptr, "g2t_indptr")?;
        check_ptr(&self.t2g_indptr, "t2g_indptr")?;
        if self.t2g_indices.len() != self.pair_count() {
            return Err(Error::InvalidArgument("index arrays differ in length".into()));
        }
        for t in 0..self.num_tiles() {
            if self.gaussians_of(t).windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!("tile {t} not sorted")));
            }
        }
        let mut a: Vec<(u32, u32)> = (0..self.num_gaussians())
            .flat_map(|g| self.tiles_of(g).iter().map(move |&t| (t, g as u32)))
            .collect();
        a.sort_unstable();
        let b: Vec<(u32, u32)> = (0..self.num_tiles())
            .flat_map(|t| self.gaussians_of(t).iter().map(move |&g| (t as u32, g)))
            .collect();
        if a != b {
            return Err(Error::InvalidArgument("pair multisets differ".into()));
        }
        Ok(())
    }

    /// Debug dump: one array per line, space separated.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        let line = |out: &mut String, name: &str, it: &mut dyn Iterator<Item = String>| {
            let _ = writeln!(out, "{name} {}", it.collect::<Vec<_>>().join(" "));
        };
        line(&mut out, "g2t_indptr", &mut self.g2t_indptr.iter().map(|v| v.to_string()));
        line(&mut out, "g2t_indices", &mut self.g2t_indices.iter().map(|v| v.to_string()));
        line(&mut out, "t2g_indptr", &mut self.t2g_indptr.iter().map(|v| v.to_string()));
        line(&mut out, "t2g_indices", &mut self.t2g_indices.iter().map(|v| v.to_string()));
        out
    }

    /// Assembles a CSR from per-Gaussian tile lists (each ascending).
    pub fn from_tile_lists(
        tile_lists: &[Vec<u32>],
        num_tiles: usize,
        radius_sigmas: f64,
    ) -> Result<Self> {
        if tile_lists.len() >= u32::MAX as usize {
            return Err(Error::InvalidArgument("too many gaussians for u32 ids".into()));
        }
        let mut g2t_indptr = Vec::with_capacity(tile_lists.len() + 1);
        g2t_indptr.push(0);
        let mut acc = 0;
        for l in tile_lists {
            if l.iter().any(|&t| t as usize >= num_tiles) {
                return Err(Error::OutOfRange("tile id beyond tile count".into()));
            }
            if l.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument("tile list not strictly ascending".into()));
            }
            acc += l.len();
            g2t_indptr.push(acc);
        }
        let g2t_indices: Vec<u32> = tile_lists.iter().flatten().copied().collect();

        let mut keys: Vec<u64> = tile_lists
            .par_iter()
            .enumerate()
            .flat_map_iter(|(g, l)| l.iter().map(move |&t| ((t as u64) << 32) | g as u64))
            .collect();
        // keys are unique, so the sorted order is fully determined
        keys.par_sort_unstable();

        let mut t2g_indptr = vec![0usize; num_tiles + 1];
        let mut i = 0;
        while i < keys.len() {
            let tile = (keys[i] >> 32) as usize;
            let mut run = 1;
            while i + run < keys.len() && (keys[i + run] >> 32) as usize == tile {
                run += 1;
            }
            t2g_indptr[tile + 1] = run;
            i += run;
        }
        for t in 0..num_tiles {
            t2g_indptr[t + 1] += t2g_indptr[t];
        }
        let t2g_indices = keys.iter().map(|k| (*k & 0xFFFF_FFFF) as u32).collect();

        Ok(DualCsr {
            g2t_indptr,
            g2t_indices,
            t2g_indptr,
            t2g_indices,
            radius_sigmas_bits: radius_sigmas.to_bits(),
        })
    }
}

pub fn build_dual_csr(set: &GaussianSet, spec: &VoxelGridSpec, radius_sigmas: f64) -> Result<DualCsr> {
    build_dual_csr_prepared(&PreparedGaussians::from_set(set)?, spec, radius_sigmas)
}

pub fn build_dual_csr_prepared(
    prep: &PreparedGaussians,
    spec: &VoxelGridSpec,
    radius_sigmas: f64,
) -> Result<DualCsr> {
    if !(radius_sigmas.is_finite() && radius_sigmas > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius_sigmas {radius_sigmas} must be positive"
        )));
    }
    let lists: Vec<Vec<u32>> = (0..prep.len())
        .into_par_iter()
        .map(|g| tiles_overlapping(spec, &gaussian_aabb(prep.mean(g), prep.cov(g), radius_sigmas)))
        .collect();
    DualCsr::from_tile_lists(&lists, spec.num_tiles(), radius_sigmas)
}
