//! Gaussian-to-voxel splatting.
//!
//! A [`GaussianSet`] is binned against the 4×4×4 tiles of a
//! [`VoxelGridSpec`] into a [`DualCsr`] (tile→Gaussian rows drive the
//! forward pass, Gaussian→tile rows the backward pass). The forward pass
//! produces per-voxel density `F_v = Σ_g w_{g,v}` and normalized features
//! `G_v = Σ_g w_{g,v} f_g / max(F_v, ε)`; the backward pass returns
//! gradients for means, covariances, opacities and features without any
//! shared writes.
//!
//! Each Gaussian's support is its Mahalanobis ellipsoid of radius 3
//! (`dᵀΣ⁻¹d ≤ 9`). The tile pairing covers that support exactly, so the
//! binned kernels and the all-pairs kernels in [`naive`] compute the same
//! function.
//!
//! ```
//! use g2v_core::{build_dual_csr, splat_forward, Gaussian, GaussianSet, VoxelGridSpec};
//!
//! let spec = VoxelGridSpec::new([0.0; 3], [8, 8, 8], 0.5).unwrap();
//! let g = Gaussian::isotropic([2.0, 2.0, 2.0], 0.4, 0.9, vec![1.0, 0.0]);
//! let set = GaussianSet::from_gaussians(2, [g]).unwrap();
//! let csr = build_dual_csr(&set, &spec, 3.0).unwrap();
//! let out = splat_forward(&set, &csr, &spec).unwrap();
//! assert!(out.density().iter().any(|&f| f > 0.5));
//! ```

pub mod binning;
pub mod error;
pub mod geometry;
pub mod grad;
pub mod gradcheck;
pub mod io;
pub mod labeler;
pub mod losses;
pub mod naive;
pub mod prepared;
pub mod query;
pub mod render;
pub mod splat;
pub mod synth;
pub mod types;

pub use binning::{build_dual_csr, build_dual_csr_prepared, DualCsr};
pub use error::{Error, Result};
pub use geometry::{Covariance3, DEFAULT_RADIUS_SIGMAS};
pub use grad::{splat_backward, splat_backward_prepared, upstream_loss, GradientBuffers};
pub use prepared::PreparedGaussians;
pub use query::{SemanticGrid, TextEmbeddingBank};
pub use render::{render, RenderTarget};
pub use splat::{splat_bev_forward, splat_forward, splat_forward_prepared, OccupancyHead, OccupancyHeadConfig, SplatOutput, EPSILON};
pub use types::{CameraModel, Gaussian, GaussianSet, GaussianSetBuilder, PointCloud, VoxelGrid, VoxelGridSpec};
