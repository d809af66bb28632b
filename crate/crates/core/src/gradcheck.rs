//! Central finite-difference check of the analytic backward pass.
//!
//! The numeric side only ever calls the forward accumulator: for a perturbed
//! Gaussian it re-splats the tiles that Gaussian is paired with (the CSR is
//! frozen at the unperturbed point) and differences `Σ_v ⟨Ḡ_v, G_v⟩` over
//! those tiles; all other voxels cancel exactly. Perturbations that change
//! the tile pairing or move a voxel across the support boundary make the
//! objective non-smooth and are skipped and counted.

use nalgebra::Matrix3;

use crate::binning::{tile_voxel_range_unchecked, tiles_overlapping, DualCsr};
use crate::error::Result;
use crate::geometry::{gaussian_aabb, mahalanobis_sq};
use crate::grad::{splat_backward_prepared, GradientBuffers};
use crate::prepared::PreparedGaussians;
use crate::splat::{accumulate_tile, axis_centers, normalize, splat_forward_prepared};
use crate::types::VoxelGridSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Scale the opacity step by `|α|`. Needed when opacities are far below
    /// the step, e.g. in scenes probing the `F_v ≤ ε` branch.
    pub opacity_relative_step: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            rel_tol: 1e-4,
            abs_tol: 1e-8,
            opacity_relative_step: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: &'static str,
    pub checked: usize,
    pub skipped: usize,
    pub failures: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// (gaussian, component, analytic, numeric) of the largest violation
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl ParamCheck {
    fn new(name: &'static str) -> Self {
        ParamCheck {
            name,
            checked: 0,
            skipped: 0,
            failures: 0,
            max_rel_err: 0.0,
            max_abs_err: 0.0,
            worst: None,
        }
    }

    fn record(&mut self, cfg: &GradCheckConfig, g: usize, comp: usize, analytic: f64, numeric: f64) {
        self.checked += 1;
        let abs = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        let rel = if scale > 0.0 { abs / scale } else { 0.0 };
        // relative error only means something above the absolute floor
        if abs > cfg.abs_tol {
            self.max_rel_err = self.max_rel_err.max(rel);
        }
        self.max_abs_err = self.max_abs_err.max(abs);
        if abs > (cfg.rel_tol * scale).max(cfg.abs_tol) {
            self.failures += 1;
            let worse = self
                .worst
                .map(|(_, _, a, n)| abs > (a - n).abs())
                .unwrap_or(true);
            if worse {
                self.worst = Some((g, comp, analytic, numeric));
            }
        }
    }

    fn merge(&mut self, other: &ParamCheck) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.failures += other.failures;
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        self.max_abs_err = self.max_abs_err.max(other.max_abs_err);
        if self.worst.is_none() {
            self.worst = other.worst;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl Default for GradCheckReport {
    fn default() -> Self {
        GradCheckReport {
            params: ["mean", "covariance", "opacity", "feature"]
                .into_iter()
                .map(ParamCheck::new)
                .collect(),
        }
    }
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.failures == 0)
    }

    pub fn merge(&mut self, other: &GradCheckReport) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            a.merge(b);
        }
    }

    pub fn total_checked(&self) -> usize {
        self.params.iter().map(|p| p.checked).sum()
    }

    pub fn total_skipped(&self) -> usize {
        self.params.iter().map(|p| p.skipped).sum()
    }
}

struct LocalObjective<'a> {
    spec: &'a VoxelGridSpec,
    csr: &'a DualCsr,
    upstream: &'a [f64],
    centers: [Vec<f64>; 3],
    radius_sq: f64,
}

impl LocalObjective<'_> {
    /// `Σ ⟨Ḡ_v, G_v⟩` over the voxels of Gaussian `g`'s frozen tiles.
    fn value(&self, prep: &PreparedGaussians, g: usize) -> f64 {
        let c = prep.feature_dim();
        let mut total = 0.0;
        for &t in self.csr.tiles_of(g) {
            let t = t as usize;
            let range = tile_voxel_range_unchecked(self.spec, t);
            let mut f = vec![0.0; range.len()];
            let mut n = vec![0.0; range.len() * c];
            accumulate_tile(
                prep,
                self.csr.gaussians_of(t),
                &range,
                &self.centers,
                self.radius_sq,
                &mut f,
                &mut n,
            );
            for (k, v) in range.voxels(self.spec).enumerate() {
                let row = &mut n[k * c..(k + 1) * c];
                normalize(f[k], row);
                total += row
                    .iter()
                    .zip(&self.upstream[v * c..(v + 1) * c])
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
        }
        total
    }

    /// Whether Gaussian `g` in `prep` keeps the frozen pairing and the same
    /// in-support voxel set as in `base`.
    fn stable(&self, base: &PreparedGaussians, prep: &PreparedGaussians, g: usize) -> bool {
        let aabb = gaussian_aabb(prep.mean(g), prep.cov(g), self.csr.radius_sigmas());
        if tiles_overlapping(self.spec, &aabb) != self.csr.tiles_of(g) {
            return false;
        }
        for &t in self.csr.tiles_of(g) {
            let range = tile_voxel_range_unchecked(self.spec, t as usize);
            for iz in range.lo[2]..range.hi[2] {
                for iy in range.lo[1]..range.hi[1] {
                    for ix in range.lo[0]..range.hi[0] {
                        let x = nalgebra::Vector3::new(
                            self.centers[0][ix],
                            self.centers[1][iy],
                            self.centers[2][iz],
                        );
                        let a = mahalanobis_sq(base.cov(g).inverse(), &(x - base.mean(g)));
                        let b = mahalanobis_sq(prep.cov(g).inverse(), &(x - prep.mean(g)));
                        if (a <= self.radius_sq) != (b <= self.radius_sq) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

const COV_COMPONENTS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// Checks every parameter of every Gaussian against central differences of
/// `Σ_v ⟨Ḡ_v, G_v⟩`. Covariance entries are perturbed symmetrically, so an
/// off-diagonal check compares against `∂L/∂Σ_ij + ∂L/∂Σ_ji`.
pub fn check_gradients(
    prep: &PreparedGaussians,
    spec: &VoxelGridSpec,
    csr: &DualCsr,
    upstream: &[f64],
    cfg: &GradCheckConfig,
) -> Result<(GradCheckReport, GradientBuffers)> {
    let forward = splat_forward_prepared(prep, csr, spec)?;
    let analytic = splat_backward_prepared(prep, csr, spec, &forward, upstream)?;
    let obj = LocalObjective {
        spec,
        csr,
        upstream,
        centers: axis_centers(spec),
        radius_sq: csr.radius_sigmas() * csr.radius_sigmas(),
    };
    let mut report = GradCheckReport::default();
    let mut work = prep.clone();
    let h = cfg.step;

    for g in 0..prep.len() {
        // means
        for k in 0..3 {
            let base = *prep.mean(g);
            let mut plus = base;
            plus[k] += h;
            let mut minus = base;
            minus[k] -= h;
            work.set_mean(g, plus);
            let ok_p = obj.stable(prep, &work, g);
            let lp = obj.value(&work, g);
            work.set_mean(g, minus);
            let ok_m = obj.stable(prep, &work, g);
            let lm = obj.value(&work, g);
            work.set_mean(g, base);
            if ok_p && ok_m {
                report.params[0].record(cfg, g, k, analytic.d_mean[g][k], (lp - lm) / (2.0 * h));
            } else {
                report.params[0].skipped += 1;
            }
        }

        // covariance
        let sigma = *prep.cov(g).matrix();
        for (comp, &(i, j)) in COV_COMPONENTS.iter().enumerate() {
            let perturbed = |delta: f64| {
                let mut m: Matrix3<f64> = sigma;
                m[(i, j)] += delta;
                if i != j {
                    m[(j, i)] += delta;
                }
                m
            };
            let a = if i == j {
                analytic.d_cov[g][(i, i)]
            } else {
                analytic.d_cov[g][(i, j)] + analytic.d_cov[g][(j, i)]
            };
            let valid = work.set_cov(g, perturbed(h)).is_ok();
            let ok_p = valid && obj.stable(prep, &work, g);
            let lp = if valid { obj.value(&work, g) } else { 0.0 };
            let valid = work.set_cov(g, perturbed(-h)).is_ok();
            let ok_m = valid && obj.stable(prep, &work, g);
            let lm = if valid { obj.value(&work, g) } else { 0.0 };
            work.set_cov(g, sigma)?;
            if ok_p && ok_m {
                report.params[1].record(cfg, g, comp, a, (lp - lm) / (2.0 * h));
            } else {
                report.params[1].skipped += 1;
            }
        }

        // opacity (support does not depend on it)
        let alpha = prep.opacity(g);
        let ha = if cfg.opacity_relative_step {
            h * alpha.abs().max(f64::MIN_POSITIVE)
        } else {
            h
        };
        work.set_opacity(g, alpha + ha);
        let lp = obj.value(&work, g);
        work.set_opacity(g, alpha - ha);
        let lm = obj.value(&work, g);
        work.set_opacity(g, alpha);
        report.params[2].record(cfg, g, 0, analytic.d_opacity[g], (lp - lm) / (2.0 * ha));

        // features
        for k in 0..prep.feature_dim() {
            let base = prep.feature(g)[k];
            work.feature_mut(g)[k] = base + h;
            let lp = obj.value(&work, g);
            work.feature_mut(g)[k] = base - h;
            let lm = obj.value(&work, g);
            work.feature_mut(g)[k] = base;
            report.params[3].record(
                cfg,
                g,
                k,
                analytic.feature_grad(g)[k],
                (lp - lm) / (2.0 * h),
            );
        }
    }
    Ok((report, analytic))
}
