//! Kernel-ready Gaussians: means, validated covariances with cached inverses,
//! opacities and feature rows, all in `f64`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{covariance_from_quat_scale, Covariance3};
use crate::types::GaussianSet;

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGaussians {
    means: Vec<Vector3<f64>>,
    covs: Vec<Covariance3>,
    opacities: Vec<f64>,
    features: Vec<f64>,
    feature_dim: usize,
}

impl PreparedGaussians {
    /// Builds covariances from quaternion and scale. Near-singular covariances
    /// are reported with the offending Gaussian's index.
    pub fn from_set(set: &GaussianSet) -> Result<Self> {
        let covs = (0..set.len())
            .map(|i| {
                covariance_from_quat_scale(set.quat(i), set.scale(i))
                    .map_err(|e| Error::gaussian(i, e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedGaussians {
            means: (0..set.len()).map(|i| set.mean(i)).collect(),
            covs,
            opacities: set.opacities().to_vec(),
            features: set.features().to_vec(),
            feature_dim: set.feature_dim(),
        })
    }

    /// Builds from explicit covariances. Opacities are not range-checked so
    /// perturbation harnesses can step across the [0, 1] boundary.
    pub fn new(
        means: Vec<Vector3<f64>>,
        covs: Vec<Covariance3>,
        opacities: Vec<f64>,
        features: Vec<f64>,
        feature_dim: usize,
    ) -> Result<Self> {
        let n = means.len();
        if covs.len() != n || opacities.len() != n || features.len() != n * feature_dim {
            return Err(Error::shape("prepared gaussian columns differ in length"));
        }
        if feature_dim == 0 {
            return Err(Error::InvalidArgument("feature_dim must be positive".into()));
        }
        Ok(PreparedGaussians {
            means,
            covs,
            opacities,
            features,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    #[inline]
    pub fn mean(&self, g: usize) -> &Vector3<f64> {
        &self.means[g]
    }

    #[inline]
    pub fn cov(&self, g: usize) -> &Covariance3 {
        &self.covs[g]
    }

    #[inline]
    pub fn opacity(&self, g: usize) -> f64 {
        self.opacities[g]
    }

    #[inline]
    pub fn feature(&self, g: usize) -> &[f64] {
        &self.features[g * self.feature_dim..(g + 1) * self.feature_dim]
    }

    pub fn set_mean(&mut self, g: usize, mean: Vector3<f64>) {
        self.means[g] = mean;
    }

    pub fn set_cov(&mut self, g: usize, sigma: Matrix3<f64>) -> Result<()> {
        self.covs[g] = Covariance3::new(sigma)?;
        Ok(())
    }

    pub fn set_opacity(&mut self, g: usize, opacity: f64) {
        self.opacities[g] = opacity;
    }

    pub fn feature_mut(&mut self, g: usize) -> &mut [f64] {
        &mut self.features[g * self.feature_dim..(g + 1) * self.feature_dim]
    }

    /// Flattens onto the plane `z = plane_z`: covariances keep their xy
    /// block (the exact z-marginal) and get a decoupled z variance, so
    /// evaluating at points with `z = plane_z` reproduces the 2D marginal
    /// density.
    pub fn marginalized_to_plane(&self, plane_z: f64) -> Result<Self> {
        let covs = self
            .covs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let s = c.matrix();
                let mut m = Matrix3::zeros();
                m.fixed_view_mut::<2, 2>(0, 0)
                    .copy_from(&crate::geometry::marginalize_bev(c));
                m[(2, 2)] = s[(0, 0)].max(s[(1, 1)]);
                Covariance3::new(m).map_err(|e| Error::gaussian(i, e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedGaussians {
            means: self
                .means
                .iter()
                .map(|m| Vector3::new(m[0], m[1], plane_z))
                .collect(),
            covs,
            opacities: self.opacities.clone(),
            features: self.features.clone(),
            feature_dim: self.feature_dim,
        })
    }
}
