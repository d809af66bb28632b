//! Scene and grid containers shared by every kernel.
//!
//! Gaussian sets are stored column-wise so the splat kernels can stream one
//! attribute at a time. Values are held in `f64`; the on-disk formats use
//! `f32`, so anything loaded from a file survives a save/load cycle exactly.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::{Error, Result};

/// Quaternions closer than this to unit length are kept bit-for-bit.
pub const QUAT_KEEP_TOL: f64 = 1e-6;
/// Quaternions further than this from unit length are rejected as corrupt.
pub const QUAT_RENORM_TOL: f64 = 1e-3;

/// A single anisotropic Gaussian. Quaternion order is (w, x, y, z); scale is
/// the per-axis standard deviation in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: [f64; 3],
    pub quat: [f64; 4],
    pub scale: [f64; 3],
    pub opacity: f64,
    pub feature: Vec<f64>,
}

impl Gaussian {
    pub fn isotropic(mean: [f64; 3], sigma: f64, opacity: f64, feature: Vec<f64>) -> Self {
        Gaussian {
            mean,
            quat: [1.0, 0.0, 0.0, 0.0],
            scale: [sigma; 3],
            opacity,
            feature,
        }
    }
}

/// Applies the quaternion acceptance policy: near-unit quaternions are kept
/// untouched, slightly drifted ones renormalized, anything else rejected.
pub fn normalize_quat(q: [f64; 4]) -> std::result::Result<[f64; 4], String> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err("non-finite quaternion".into());
    }
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let drift = (norm - 1.0).abs();
    if drift <= QUAT_KEEP_TOL {
        Ok(q)
    } else if drift <= QUAT_RENORM_TOL {
        Ok([q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm])
    } else {
        Err(format!("quaternion norm {norm} too far from 1"))
    }
}

/// Columnar set of Gaussians sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSet {
    feature_dim: usize,
    means: Vec<[f64; 3]>,
    quats: Vec<[f64; 4]>,
    scales: Vec<[f64; 3]>,
    opacities: Vec<f64>,
    features: Vec<f64>,
}

impl GaussianSet {
    pub fn empty(feature_dim: usize) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::InvalidArgument("feature_dim must be positive".into()));
        }
        Ok(GaussianSet {
            feature_dim,
            means: Vec::new(),
            quats: Vec::new(),
            scales: Vec::new(),
            opacities: Vec::new(),
            features: Vec::new(),
        })
    }

    pub fn from_gaussians<I>(feature_dim: usize, gaussians: I) -> Result<Self>
    where
        I: IntoIterator<Item = Gaussian>,
    {
        let mut builder = GaussianSetBuilder::new(feature_dim)?;
        for g in gaussians {
            builder.push(g)?;
        }
        Ok(builder.build())
    }

    /// Builds a set from raw columns, validating every Gaussian.
    pub fn from_columns(
        feature_dim: usize,
        means: Vec<[f64; 3]>,
        quats: Vec<[f64; 4]>,
        scales: Vec<[f64; 3]>,
        opacities: Vec<f64>,
        features: Vec<f64>,
    ) -> Result<Self> {
        let n = means.len();
        if feature_dim == 0 {
            return Err(Error::InvalidArgument("feature_dim must be positive".into()));
        }
        if quats.len() != n || scales.len() != n || opacities.len() != n {
            return Err(Error::shape("gaussian columns differ in length"));
        }
        if features.len() != n * feature_dim {
            return Err(Error::shape(format!(
                "feature column has {} entries, expected {}",
                features.len(),
                n * feature_dim
            )));
        }
        let mut set = GaussianSet {
            feature_dim,
            means,
            quats,
            scales,
            opacities,
            features,
        };
        for i in 0..n {
            set.quats[i] = validate_fields(
                i,
                &set.means[i],
                &set.quats[i],
                &set.scales[i],
                set.opacities[i],
                &set.features[i * feature_dim..(i + 1) * feature_dim],
            )?;
        }
        Ok(set)
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

    pub fn mean(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.means[i])
    }

    pub fn quat(&self, i: usize) -> [f64; 4] {
        self.quats[i]
    }

    pub fn scale(&self, i: usize) -> [f64; 3] {
        self.scales[i]
    }

    pub fn opacity(&self, i: usize) -> f64 {
        self.opacities[i]
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn means(&self) -> &[[f64; 3]] {
        &self.means
    }

    pub fn quats(&self) -> &[[f64; 4]] {
        &self.quats
    }

    pub fn scales(&self) -> &[[f64; 3]] {
        &self.scales
    }

    pub fn opacities(&self) -> &[f64] {
        &self.opacities
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn get(&self, i: usize) -> Gaussian {
        Gaussian {
            mean: self.means[i],
            quat: self.quats[i],
            scale: self.scales[i],
            opacity: self.opacities[i],
            feature: self.feature(i).to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Gaussian> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    /// Returns the set reordered so that entry `k` is the old entry `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::shape("permutation length differs from set size"));
        }
        GaussianSet::from_gaussians(self.feature_dim, order.iter().map(|&i| self.get(i)))
    }
}

/// Incremental, validating constructor for [`GaussianSet`].
#[derive(Debug)]
pub struct GaussianSetBuilder {
    set: GaussianSet,
}

impl GaussianSetBuilder {
    pub fn new(feature_dim: usize) -> Result<Self> {
        Ok(GaussianSetBuilder {
            set: GaussianSet::empty(feature_dim)?,
        })
    }

    pub fn with_capacity(feature_dim: usize, n: usize) -> Result<Self> {
        let mut b = Self::new(feature_dim)?;
        b.set.means.reserve(n);
        b.set.quats.reserve(n);
        b.set.scales.reserve(n);
        b.set.opacities.reserve(n);
        b.set.features.reserve(n * feature_dim);
        Ok(b)
    }

    pub fn push(&mut self, g: Gaussian) -> Result<()> {
        let index = self.set.len();
        if g.feature.len() != self.set.feature_dim {
            return Err(Error::gaussian(
                index,
                format!(
                    "feature length {} differs from set dimension {}",
                    g.feature.len(),
                    self.set.feature_dim
                ),
            ));
        }
        let quat = validate_fields(index, &g.mean, &g.quat, &g.scale, g.opacity, &g.feature)?;
        self.set.means.push(g.mean);
        self.set.quats.push(quat);
        self.set.scales.push(g.scale);
        self.set.opacities.push(g.opacity);
        self.set.features.extend_from_slice(&g.feature);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn build(self) -> GaussianSet {
        self.set
    }
}

fn validate_fields(
    index: usize,
    mean: &[f64; 3],
    quat: &[f64; 4],
    scale: &[f64; 3],
    opacity: f64,
    feature: &[f64],
) -> Result<[f64; 4]> {
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::gaussian(index, "non-finite mean"));
    }
    let quat = normalize_quat(*quat).map_err(|r| Error::gaussian(index, r))?;
    if scale.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::gaussian(index, "scale must be finite and positive"));
    }
    if !(0.0..=1.0).contains(&opacity) {
        return Err(Error::gaussian(
            index,
            format!("opacity {opacity} outside [0, 1]"),
        ));
    }
    if feature.iter().any(|v| !v.is_finite()) {
        return Err(Error::gaussian(index, "non-finite feature"));
    }
    Ok(quat)
}

/// Axis-aligned voxel grid: `origin` is the minimum corner, voxels are cubes
/// of edge `voxel_size`, and voxels are linearized x-fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGridSpec {
    pub origin: [f64; 3],
    pub dims: [usize; 3],
    pub voxel_size: f64,
    pub tile_dims: [usize; 3],
}

pub const DEFAULT_TILE_DIMS: [usize; 3] = [4, 4, 4];

impl VoxelGridSpec {
    pub fn new(origin: [f64; 3], dims: [usize; 3], voxel_size: f64) -> Result<Self> {
        Self::with_tiles(origin, dims, voxel_size, DEFAULT_TILE_DIMS)
    }

    pub fn with_tiles(
        origin: [f64; 3],
        dims: [usize; 3],
        voxel_size: f64,
        tile_dims: [usize; 3],
    ) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGrid(format!("dims {dims:?} must be positive")));
        }
        if tile_dims.contains(&0) {
            return Err(Error::InvalidGrid(format!(
                "tile dims {tile_dims:?} must be positive"
            )));
        }
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "voxel size {voxel_size} must be positive"
            )));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite origin".into()));
        }
        Ok(VoxelGridSpec {
            origin,
            dims,
            voxel_size,
            tile_dims,
        })
    }

    /// [-40, 40] x [-40, 40] x [-1, 5.4] at 0.4 m.
    pub fn nuscenes() -> Self {
        Self::new([-40.0, -40.0, -1.0], [200, 200, 16], 0.4).expect("valid preset")
    }

    /// [0, 20] x [-10, 10] x [-1, 4] at 0.2 m.
    pub fn custom_ugv() -> Self {
        Self::new([0.0, -10.0, -1.0], [100, 100, 25], 0.2).expect("valid preset")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "nuscenes" => Some(Self::nuscenes()),
            "custom" => Some(Self::custom_ugv()),
            _ => None,
        }
    }

    pub fn num_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn tile_grid_dims(&self) -> [usize; 3] {
        [
            self.dims[0].div_ceil(self.tile_dims[0]),
            self.dims[1].div_ceil(self.tile_dims[1]),
            self.dims[2].div_ceil(self.tile_dims[2]),
        ]
    }

    pub fn num_tiles(&self) -> usize {
        let t = self.tile_grid_dims();
        t[0] * t[1] * t[2]
    }

    pub fn linear_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    pub fn unravel(&self, linear: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [linear % nx, (linear / nx) % ny, linear / (nx * ny)]
    }

    pub fn contains_index(&self, index: [usize; 3]) -> bool {
        index.iter().zip(self.dims.iter()).all(|(i, n)| i < n)
    }

    /// Center of voxel `index`: `origin + (index + 0.5) * voxel_size`.
    pub fn voxel_center(&self, index: [usize; 3]) -> Result<Vector3<f64>> {
        if !self.contains_index(index) {
            return Err(Error::OutOfRange(format!(
                "voxel index {index:?} outside dims {:?}",
                self.dims
            )));
        }
        Ok(self.voxel_center_unchecked(index))
    }

    #[inline]
    pub(crate) fn voxel_center_unchecked(&self, index: [usize; 3]) -> Vector3<f64> {
        Vector3::new(
            self.origin[0] + (index[0] as f64 + 0.5) * self.voxel_size,
            self.origin[1] + (index[1] as f64 + 0.5) * self.voxel_size,
            self.origin[2] + (index[2] as f64 + 0.5) * self.voxel_size,
        )
    }

    /// Voxel containing `point`, or `None` if outside the grid.
    pub fn voxel_of_point(&self, point: &Vector3<f64>) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let f = ((point[k] - self.origin[k]) / self.voxel_size).floor();
            if !(f >= 0.0 && f < self.dims[k] as f64) {
                return None;
            }
            idx[k] = f as usize;
        }
        Some(idx)
    }

    /// Maximum corner of the grid.
    pub fn max_corner(&self) -> Vector3<f64> {
        Vector3::new(
            self.origin[0] + self.dims[0] as f64 * self.voxel_size,
            self.origin[1] + self.dims[1] as f64 * self.voxel_size,
            self.origin[2] + self.dims[2] as f64 * self.voxel_size,
        )
    }

    /// Top-down grid with one cell layer and 4x4x1 tiles.
    pub fn bev(&self) -> Self {
        VoxelGridSpec {
            origin: self.origin,
            dims: [self.dims[0], self.dims[1], 1],
            voxel_size: self.voxel_size,
            tile_dims: [self.tile_dims[0], self.tile_dims[1], 1],
        }
    }

    pub fn is_bev(&self) -> bool {
        self.dims[2] == 1
    }
}

/// Dense voxel grid: density per voxel, optional feature rows and occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub spec: VoxelGridSpec,
    pub feature_dim: usize,
    pub density: Vec<f64>,
    pub features: Option<Vec<f64>>,
    pub occupancy: Option<Vec<bool>>,
}

impl VoxelGrid {
    pub fn zeros(spec: VoxelGridSpec, feature_dim: usize) -> Self {
        let n = spec.num_voxels();
        VoxelGrid {
            spec,
            feature_dim,
            density: vec![0.0; n],
            features: (feature_dim > 0).then(|| vec![0.0; n * feature_dim]),
            occupancy: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.spec.num_voxels();
        if self.density.len() != n {
            return Err(Error::shape("density length differs from voxel count"));
        }
        if let Some(f) = &self.features {
            if f.len() != n * self.feature_dim {
                return Err(Error::shape("feature array length mismatch"));
            }
        }
        if let Some(o) = &self.occupancy {
            if o.len() != n {
                return Err(Error::shape("occupancy length mismatch"));
            }
        }
        if let Some(v) = self.density.iter().position(|d| !(*d >= 0.0)) {
            return Err(Error::InvalidGrid(format!("negative or NaN density at voxel {v}")));
        }
        Ok(())
    }

    pub fn feature_row(&self, v: usize) -> Option<&[f64]> {
        let c = self.feature_dim;
        self.features.as_ref().map(|f| &f[v * c..(v + 1) * c])
    }
}

/// Pinhole camera. `extrinsic` maps points from the camera's reference frame
/// (ego, lidar or world, depending on the caller) into camera coordinates
/// with +z along the optical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub intrinsics: Matrix3<f64>,
    pub extrinsic: Matrix4<f64>,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn new(
        intrinsics: Matrix3<f64>,
        extrinsic: Matrix4<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let cam = CameraModel {
            intrinsics,
            extrinsic,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Intrinsics with focal `f` and principal point `(cx, cy)`.
    pub fn pinhole(f: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Matrix3::new(f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0);
        Self::new(k, Matrix4::identity(), width, height)
    }

    pub fn with_extrinsic(mut self, extrinsic: Matrix4<f64>) -> Result<Self> {
        self.extrinsic = extrinsic;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsics;
        if k.iter().any(|v| !v.is_finite()) || self.extrinsic.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCamera("non-finite entries".into()));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(Error::InvalidCamera("intrinsics not upper-triangular".into()));
        }
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) || k[(2, 2)] != 1.0 {
            return Err(Error::InvalidCamera(
                "focal entries must be positive and K[2][2] = 1".into(),
            ));
        }
        check_rigid(&self.extrinsic).map_err(Error::InvalidCamera)?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image size must be positive".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.extrinsic.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.extrinsic.fixed_view::<3, 1>(0, 3).into_owned()
    }
}

/// Checks that `m` is a rigid transform: orthonormal rotation block with
/// positive determinant and a `[0 0 0 1]` last row.
pub fn check_rigid(m: &Matrix4<f64>) -> std::result::Result<(), String> {
    let r = m.fixed_view::<3, 3>(0, 0).into_owned();
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    if err > 1e-6 {
        return Err(format!("rotation block not orthonormal (error {err:e})"));
    }
    if r.determinant() <= 0.0 {
        return Err("rotation block is a reflection".into());
    }
    let last = m.fixed_view::<1, 4>(3, 0);
    if last[(0, 0)] != 0.0 || last[(0, 1)] != 0.0 || last[(0, 2)] != 0.0 || last[(0, 3)] != 1.0 {
        return Err("last row must be [0 0 0 1]".into());
    }
    Ok(())
}

/// Inverse of a rigid transform.
pub fn invert_rigid(m: &Matrix4<f64>) -> Matrix4<f64> {
    let r = m.fixed_view::<3, 3>(0, 0).transpose();
    let t = -(r * m.fixed_view::<3, 1>(0, 3));
    let mut out = Matrix4::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    out
}

/// Applies a homogeneous rigid transform to a point.
pub fn transform_point(m: &Matrix4<f64>, p: &Vector3<f64>) -> Vector3<f64> {
    m.fixed_view::<3, 3>(0, 0) * p + m.fixed_view::<3, 1>(0, 3)
}

/// Point cloud with optional per-point features (`feature_dim` may be 0).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub feature_dim: usize,
    pub points: Vec<[f64; 3]>,
    pub features: Vec<f64>,
}

impl PointCloud {
    pub fn new(feature_dim: usize, points: Vec<[f64; 3]>, features: Vec<f64>) -> Result<Self> {
        if features.len() != points.len() * feature_dim {
            return Err(Error::shape(format!(
                "{} features for {} points of dimension {feature_dim}",
                features.len(),
                points.len()
            )));
        }
        if points.iter().flatten().chain(features.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite point cloud entry".into()));
        }
        Ok(PointCloud {
            feature_dim,
            points,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voxel_center_unit_grid() {
        let spec = VoxelGridSpec::new([0.0; 3], [2, 2, 2], 1.0).unwrap();
        assert_eq!(spec.voxel_center([0, 0, 0]).unwrap(), Vector3::new(0.5, 0.5, 0.5));
    }

    #[test]
    fn voxel_center_nuscenes_convention() {
        let spec = VoxelGridSpec::nuscenes();
        let c = spec.voxel_center([0, 0, 0]).unwrap();
        assert!((c - Vector3::new(-39.8, -39.8, -0.8)).abs().max() < 1e-12);
        assert!(spec.voxel_center([200, 0, 0]).is_err());
    }

    #[test]
    fn presets_dims() {
        assert_eq!(VoxelGridSpec::nuscenes().num_voxels(), 640_000);
        let c = VoxelGridSpec::custom_ugv();
        assert_eq!(c.dims, [100, 100, 25]);
        let top = c.max_corner();
        assert!((top - Vector3::new(20.0, 10.0, 4.0)).abs().max() < 1e-12);
    }

    #[test]
    fn tile_grid_rounds_up() {
        let spec = VoxelGridSpec::new([0.0; 3], [6, 4, 9], 1.0).unwrap();
        assert_eq!(spec.tile_grid_dims(), [2, 1, 3]);
        assert_eq!(spec.num_tiles(), 6);
    }

    #[test]
    fn linearization_is_x_fastest() {
        let spec = VoxelGridSpec::new([0.0; 3], [3, 4, 5], 1.0).unwrap();
        assert_eq!(spec.linear_index(1, 0, 0), 1);
        assert_eq!(spec.linear_index(0, 1, 0), 3);
        assert_eq!(spec.linear_index(0, 0, 1), 12);
        for l in 0..spec.num_voxels() {
            let [x, y, z] = spec.unravel(l);
            assert_eq!(spec.linear_index(x, y, z), l);
        }
    }

    #[test]
    fn rejects_bad_gaussians() {
        let ok = Gaussian::isotropic([0.0; 3], 1.0, 0.5, vec![1.0, 2.0]);
        let mut bad = ok.clone();
        bad.opacity = 1.5;
        let err = GaussianSet::from_gaussians(2, [bad]).unwrap_err();
        assert!(matches!(err, Error::InvalidGaussian { index: 0, .. }));

        let mut bad = ok.clone();
        bad.scale = [1.0, 0.0, 1.0];
        assert!(GaussianSet::from_gaussians(2, [ok.clone(), bad]).is_err());

        let mut bad = ok.clone();
        bad.feature = vec![1.0];
        assert!(GaussianSet::from_gaussians(2, [bad]).is_err());

        let mut bad = ok.clone();
        bad.mean[1] = f64::NAN;
        assert!(GaussianSet::from_gaussians(2, [bad]).is_err());

        assert!(GaussianSet::from_gaussians(2, [ok]).is_ok());
    }

    #[test]
    fn quaternion_policy() {
        assert_eq!(normalize_quat([1.0, 0.0, 0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        let q = normalize_quat([1.0005, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(q, [1.0, 0.0, 0.0, 0.0]);
        assert!(normalize_quat([1.01, 0.0, 0.0, 0.0]).is_err());
        assert!(normalize_quat([0.0; 4]).is_err());
    }

    #[test]
    fn rigid_inverse() {
        let r = nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 1.1);
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(r.matrix());
        m[(0, 3)] = 1.0;
        m[(1, 3)] = -2.0;
        m[(2, 3)] = 0.5;
        check_rigid(&m).unwrap();
        let prod = m * invert_rigid(&m);
        assert!((prod - Matrix4::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::pinhole(500.0, 320.0, 240.0, 640, 480).is_ok());
        assert!(CameraModel::pinhole(-1.0, 320.0, 240.0, 640, 480).is_err());
        let cam = CameraModel::pinhole(500.0, 320.0, 240.0, 640, 480).unwrap();
        let mut e = Matrix4::identity();
        e[(0, 0)] = 2.0;
        assert!(cam.with_extrinsic(e).is_err());
    }
}
