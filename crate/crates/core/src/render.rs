//! Front-to-back alpha compositing of Gaussians into a pinhole view.
//!
//! Pixel `(i, j)` is sampled at image coordinates `(i, j)`. Gaussians are
//! sorted once by camera depth; each pixel blends the ones whose image-space
//! Mahalanobis distance is within 3, with falloff opacity
//! `α' = α · exp(-½ Δᵀ Σ₂⁻¹ Δ)`.

use nalgebra::{Matrix2, Matrix2x3, Vector3};
use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{covariance_from_quat_scale, project_camera_point, Covariance3};
use crate::prepared::PreparedGaussians;
use crate::types::{transform_point, CameraModel, Gaussian, GaussianSet};

/// Image footprint radius in standard deviations.
pub const FOOTPRINT_SIGMAS: f64 = 3.0;

/// Compositing stops once transmittance drops below this.
pub const MIN_TRANSMITTANCE: f64 = 1e-4;

/// A Gaussian projected into an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGaussian {
    pub pixel: [f64; 2],
    pub cov: Matrix2<f64>,
    pub depth: f64,
    /// in front of the camera and the mean lands inside the image
    pub visible: bool,
}

/// First-order projection of a 3D covariance: `Σ₂ = J R Σ Rᵀ Jᵀ` with `R`
/// the extrinsic rotation and `J` the pinhole Jacobian at the camera-frame
/// mean.
pub fn project_covariance(mean: &Vector3<f64>, cov: &Covariance3, cam: &CameraModel) -> ImageGaussian {
    let pc = transform_point(&cam.extrinsic, mean);
    let proj = project_camera_point(&pc, cam);
    let r = cam.rotation();
    let sigma_cam = r * cov.matrix() * r.transpose();
    let k = &cam.intrinsics;
    let (fx, s, fy) = (k[(0, 0)], k[(0, 1)], k[(1, 1)]);
    let (x, y, z) = (pc[0], pc[1], pc[2]);
    let j = Matrix2x3::new(
        fx / z,
        s / z,
        -(fx * x + s * y) / (z * z),
        0.0,
        fy / z,
        -fy * y / (z * z),
    );
    let c = j * sigma_cam * j.transpose();
    ImageGaussian {
        pixel: proj.pixel,
        cov: (c + c.transpose()) * 0.5,
        depth: proj.depth,
        visible: proj.visible,
    }
}

pub fn project_gaussian_2d(g: &Gaussian, cam: &CameraModel) -> Result<ImageGaussian> {
    let cov = covariance_from_quat_scale(g.quat, g.scale)?;
    Ok(project_covariance(&nalgebra::Vector3::from(g.mean), &cov, cam))
}

/// `features` is `H × W × C`, `depth` and `alpha_sum` are `H × W`, all
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderTarget {
    pub width: usize,
    pub height: usize,
    pub feature_dim: usize,
    pub features: Vec<f64>,
    pub depth: Vec<f64>,
    pub alpha_sum: Vec<f64>,
}

impl RenderTarget {
    pub fn feature(&self, x: usize, y: usize) -> &[f64] {
        let p = y * self.width + x;
        &self.features[p * self.feature_dim..(p + 1) * self.feature_dim]
    }
}

/// A projected Gaussian ready for compositing.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Footprint {
    pub index: usize,
    pub center: [f64; 2],
    pub inv: Matrix2<f64>,
    pub depth: f64,
    pub opacity: f64,
    /// inclusive pixel bounds, `[x0, x1, y0, y1]`
    pub bounds: [i64; 4],
}

/// Projects, culls (behind camera, zero opacity, degenerate, off-image) and
/// stably sorts by depth.
pub(crate) fn footprints(prep: &PreparedGaussians, cam: &CameraModel) -> Vec<Footprint> {
    let mut out = Vec::new();
    for g in 0..prep.len() {
        let alpha = prep.opacity(g);
        if alpha <= 0.0 {
            continue;
        }
        let ig = project_covariance(prep.mean(g), prep.cov(g), cam);
        if !(ig.depth > 0.0) {
            continue;
        }
        let Some(inv) = ig.cov.try_inverse() else {
            continue;
        };
        if !(ig.cov[(0, 0)] > 0.0 && ig.cov[(1, 1)] > 0.0) || inv.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let hx = FOOTPRINT_SIGMAS * ig.cov[(0, 0)].sqrt();
        let hy = FOOTPRINT_SIGMAS * ig.cov[(1, 1)].sqrt();
        let x0 = (ig.pixel[0] - hx).ceil().max(0.0);
        let x1 = (ig.pixel[0] + hx).floor().min(cam.width as f64 - 1.0);
        let y0 = (ig.pixel[1] - hy).ceil().max(0.0);
        let y1 = (ig.pixel[1] + hy).floor().min(cam.height as f64 - 1.0);
        if !(x0 <= x1 && y0 <= y1) {
            continue;
        }
        out.push(Footprint {
            index: g,
            center: ig.pixel,
            inv: (inv + inv.transpose()) * 0.5,
            depth: ig.depth,
            opacity: alpha,
            bounds: [x0 as i64, x1 as i64, y0 as i64, y1 as i64],
        });
    }
    out.sort_by(|a, b| a.depth.total_cmp(&b.depth));
    out
}

impl Footprint {
    /// `α'` at pixel `(x, y)`, or `None` outside the 3σ ellipse.
    pub(crate) fn alpha_at(&self, x: f64, y: f64) -> Option<f64> {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let m = self.inv[(0, 0)] * dx * dx + 2.0 * self.inv[(0, 1)] * dx * dy + self.inv[(1, 1)] * dy * dy;
        (m <= FOOTPRINT_SIGMAS * FOOTPRINT_SIGMAS).then(|| self.opacity * (-0.5 * m).exp())
    }
}

pub fn render(set: &GaussianSet, cam: &CameraModel) -> Result<RenderTarget> {
    cam.validate()?;
    render_prepared(&PreparedGaussians::from_set(set)?, cam)
}

pub fn render_prepared(prep: &PreparedGaussians, cam: &CameraModel) -> Result<RenderTarget> {
    cam.validate()?;
    let (w, h, c) = (cam.width, cam.height, prep.feature_dim());
    let sorted = footprints(prep, cam);
    let mut features = vec![0.0; w * h * c];
    let mut depth = vec![0.0; w * h];
    let mut alpha_sum = vec![0.0; w * h];
    features
        .par_chunks_mut((w * c).max(1))
        .zip(depth.par_chunks_mut(w))
        .zip(alpha_sum.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((frow, drow), arow))| {
            let yi = y as i64;
            let row: Vec<&Footprint> = sorted
                .iter()
                .filter(|fp| fp.bounds[2] <= yi && yi <= fp.bounds[3])
                .collect();
            for x in 0..w {
                let xi = x as i64;
                let out = &mut frow[x * c..(x + 1) * c];
                let mut t = 1.0;
                for fp in row.iter().filter(|fp| fp.bounds[0] <= xi && xi <= fp.bounds[1]) {
                    let Some(a) = fp.alpha_at(x as f64, y as f64) else {
                        continue;
                    };
                    if a == 0.0 {
                        continue;
                    }
                    let weight = a * t;
                    for (o, f) in out.iter_mut().zip(prep.feature(fp.index)) {
                        *o += weight * f;
                    }
                    drow[x] += weight * fp.depth;
                    arow[x] += weight;
                    t *= 1.0 - a;
                    if t < MIN_TRANSMITTANCE {
                        break;
                    }
                }
            }
        });
    Ok(RenderTarget {
        width: w,
        height: h,
        feature_dim: c,
        features,
        depth,
        alpha_sum,
    })
}
