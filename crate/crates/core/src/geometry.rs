//! Covariances, density evaluation, camera transforms and support bounds.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::types::{invert_rigid, transform_point, CameraModel};

/// Default support radius, in standard deviations.
pub const DEFAULT_RADIUS_SIGMAS: f64 = 3.0;

/// Covariances with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Symmetric positive-definite 3x3 covariance with its cached inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance3 {
    sigma: Matrix3<f64>,
    inv: Matrix3<f64>,
}

impl Covariance3 {
    /// Validates `sigma` (symmetric, SPD, condition <= 1e12) and caches the
    /// inverse through its Cholesky factor.
    pub fn new(sigma: Matrix3<f64>) -> Result<Self> {
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite covariance".into()));
        }
        let scale = sigma.abs().max();
        if (sigma - sigma.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::InvalidArgument("covariance not symmetric".into()));
        }
        let eig = sigma.symmetric_eigenvalues();
        let lo = eig.min();
        let hi = eig.max();
        if !(lo > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "covariance not positive definite (min eigenvalue {lo:e})"
            )));
        }
        if hi / lo > MAX_CONDITION {
            return Err(Error::InvalidArgument(format!(
                "covariance condition number {:e} exceeds {MAX_CONDITION:e}",
                hi / lo
            )));
        }
        let chol = sigma
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("cholesky factorization failed".into()))?;
        let inv = chol.inverse();
        // exact symmetry keeps the quadratic forms and gradients symmetric
        let inv = (inv + inv.transpose()) * 0.5;
        Ok(Covariance3 { sigma, inv })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.sigma
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.inv
    }

    pub fn mahalanobis_sq(&self, d: &Vector3<f64>) -> f64 {
        mahalanobis_sq(&self.inv, d)
    }
}

/// `dᵀ A d` for symmetric `A`, written out so every kernel evaluates the
/// quadratic form with the same operation order.
#[inline(always)]
pub fn mahalanobis_sq(inv: &Matrix3<f64>, d: &Vector3<f64>) -> f64 {
    let (x, y, z) = (d[0], d[1], d[2]);
    inv[(0, 0)] * x * x
        + inv[(1, 1)] * y * y
        + inv[(2, 2)] * z * z
        + 2.0 * (inv[(0, 1)] * x * y + inv[(0, 2)] * x * z + inv[(1, 2)] * y * z)
}

/// Rotation matrix of a unit quaternion in (w, x, y, z) order.
pub fn quat_to_rotation(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// `Σ = R(q) · diag(scale)² · R(q)ᵀ`.
pub fn covariance_from_quat_scale(quat: [f64; 4], scale: [f64; 3]) -> Result<Covariance3> {
    if quat.iter().chain(scale.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite quaternion or scale".into()));
    }
    let r = quat_to_rotation(quat);
    let s2 = Matrix3::from_diagonal(&Vector3::new(
        scale[0] * scale[0],
        scale[1] * scale[1],
        scale[2] * scale[2],
    ));
    let sigma = r * s2 * r.transpose();
    Covariance3::new((sigma + sigma.transpose()) * 0.5)
}

/// Opacity-scaled, unnormalized density `α · exp(-½ dᵀ Σ⁻¹ d)` with
/// `d = point - mean`.
pub fn gaussian_density(
    mean: &Vector3<f64>,
    cov: &Covariance3,
    opacity: f64,
    point: &Vector3<f64>,
) -> f64 {
    let d = point - mean;
    opacity * (-0.5 * cov.mahalanobis_sq(&d)).exp()
}

/// Result of projecting a point through a pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: [f64; 2],
    pub depth: f64,
    pub visible: bool,
}

/// Frame point -> camera coordinates -> pixel. Visible iff in front of the
/// camera and inside `[0, width) x [0, height)`.
pub fn project_point(point: &Vector3<f64>, cam: &CameraModel) -> Projection {
    let pc = transform_point(&cam.extrinsic, point);
    project_camera_point(&pc, cam)
}

pub(crate) fn project_camera_point(pc: &Vector3<f64>, cam: &CameraModel) -> Projection {
    let depth = pc[2];
    if !(depth > 0.0) {
        return Projection {
            pixel: [f64::NAN, f64::NAN],
            depth,
            visible: false,
        };
    }
    let h = cam.intrinsics * pc;
    let u = h[0] / h[2];
    let v = h[1] / h[2];
    let visible = u >= 0.0 && u < cam.width as f64 && v >= 0.0 && v < cam.height as f64;
    Projection {
        pixel: [u, v],
        depth,
        visible,
    }
}

/// Lifts pixel `(u, v)` at `depth` to `(u·d, v·d, d)`, applies `K⁻¹`, then the
/// inverse extrinsic, returning the point in the camera's reference frame.
pub fn transform_pixel_depth_to_frame(
    pixel: [f64; 2],
    depth: f64,
    cam: &CameraModel,
) -> Result<Vector3<f64>> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::InvalidArgument(format!("depth {depth} must be positive")));
    }
    let k_inv = cam
        .intrinsics
        .try_inverse()
        .ok_or_else(|| Error::InvalidCamera("singular intrinsics".into()))?;
    let pc = k_inv * Vector3::new(pixel[0] * depth, pixel[1] * depth, depth);
    Ok(transform_point(&invert_rigid(&cam.extrinsic), &pc))
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Closed-interval overlap test.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }
}

/// `mean ± r · sqrt(diag Σ)`. This is the tightest box around the
/// Mahalanobis ellipsoid of radius `r`.
pub fn gaussian_aabb(mean: &Vector3<f64>, cov: &Covariance3, radius_sigmas: f64) -> Aabb {
    let s = cov.matrix();
    let half = Vector3::new(
        radius_sigmas * s[(0, 0)].sqrt(),
        radius_sigmas * s[(1, 1)].sqrt(),
        radius_sigmas * s[(2, 2)].sqrt(),
    );
    Aabb {
        min: mean - half,
        max: mean + half,
    }
}

/// Marginal over z: the top-left 2x2 block.
pub fn marginalize_bev(cov: &Covariance3) -> Matrix2<f64> {
    cov.matrix().fixed_view::<2, 2>(0, 0).into_owned()
}

/// Unnormalized 2D density `α · exp(-½ dᵀ Σ⁻¹ d)`.
pub fn gaussian_density_2d(
    mean: &Vector2<f64>,
    cov: &Matrix2<f64>,
    opacity: f64,
    point: &Vector2<f64>,
) -> Option<f64> {
    let inv = cov.try_inverse()?;
    let d = point - mean;
    Some(opacity * (-0.5 * (d.transpose() * inv * d)[(0, 0)]).exp())
}
