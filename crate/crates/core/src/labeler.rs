//! Geometric pseudo-label generation: decorate lidar points with image
//! features, accumulate posed frames in a common frame, voxelize.

use nalgebra::{Matrix4, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::project_point;
use crate::types::{check_rigid, transform_point, CameraModel, PointCloud, VoxelGrid, VoxelGridSpec};

/// Dense `H' × W' × C` feature image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub width: usize,
    pub height: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(width: usize, height: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "feature map {width}×{height}×{dim} must have positive dims"
            )));
        }
        if data.len() != width * height * dim {
            return Err(Error::shape(format!(
                "feature map {width}×{height}×{dim} needs {} values, got {}",
                width * height * dim,
                data.len()
            )));
        }
        Ok(FeatureMap {
            width,
            height,
            dim,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, dim: usize) -> Result<Self> {
        Self::new(width, height, dim, vec![0.0; width * height * dim])
    }

    pub fn node(&self, x: usize, y: usize) -> &[f64] {
        let p = y * self.width + x;
        &self.data[p * self.dim..(p + 1) * self.dim]
    }

    pub fn node_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let p = y * self.width + x;
        &mut self.data[p * self.dim..(p + 1) * self.dim]
    }

    /// A single-layer grid (`dims = (W', H', 1)`) holding the map as features;
    /// this is the on-disk form.
    pub fn to_voxel_grid(&self) -> VoxelGrid {
        let spec = VoxelGridSpec {
            origin: [0.0; 3],
            dims: [self.width, self.height, 1],
            voxel_size: 1.0,
            tile_dims: [4, 4, 1],
        };
        VoxelGrid {
            spec,
            feature_dim: self.dim,
            density: vec![0.0; self.width * self.height],
            features: Some(self.data.clone()),
            occupancy: None,
        }
    }

    pub fn from_voxel_grid(grid: &VoxelGrid) -> Result<Self> {
        if grid.spec.dims[2] != 1 {
            return Err(Error::shape("feature map grid must have a single z layer"));
        }
        let data = grid
            .features
            .clone()
            .ok_or_else(|| Error::shape("feature map grid carries no features"))?;
        Self::new(grid.spec.dims[0], grid.spec.dims[1], grid.feature_dim, data)
    }

    /// Continuous map coordinates of image pixel `(u, v)` when the map spans
    /// an image of `image_w × image_h` pixels.
    pub fn map_coords(&self, pixel: [f64; 2], image_w: usize, image_h: usize) -> [f64; 2] {
        [
            (pixel[0] + 0.5) * self.width as f64 / image_w as f64 - 0.5,
            (pixel[1] + 0.5) * self.height as f64 / image_h as f64 - 0.5,
        ]
    }

    /// Samples at continuous map coordinates, clamped to the map.
    pub fn sample(&self, at: [f64; 2], sampling: Sampling, out: &mut [f64]) {
        let fx = at[0].clamp(0.0, (self.width - 1) as f64);
        let fy = at[1].clamp(0.0, (self.height - 1) as f64);
        match sampling {
            Sampling::Nearest => {
                let x = ((fx + 0.5).floor() as usize).min(self.width - 1);
                let y = ((fy + 0.5).floor() as usize).min(self.height - 1);
                out.copy_from_slice(self.node(x, y));
            }
            Sampling::Bilinear => {
                let x0 = fx.floor() as usize;
                let y0 = fy.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let y1 = (y0 + 1).min(self.height - 1);
                let tx = fx - x0 as f64;
                let ty = fy - y0 as f64;
                let corners = [
                    ((1.0 - tx) * (1.0 - ty), self.node(x0, y0)),
                    (tx * (1.0 - ty), self.node(x1, y0)),
                    ((1.0 - tx) * ty, self.node(x0, y1)),
                    (tx * ty, self.node(x1, y1)),
                ];
                out.fill(0.0);
                for (w, node) in corners {
                    if w != 0.0 {
                        for (o, v) in out.iter_mut().zip(node) {
                            *o += w * v;
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    #[default]
    Bilinear,
    Nearest,
}

/// One posed sensor sweep with its camera and image features.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFrame {
    /// sensor frame, meters
    pub points: Vec<[f64; 3]>,
    /// world-from-sensor
    pub pose: Matrix4<f64>,
    /// extrinsic is camera-from-sensor
    pub camera: CameraModel,
    pub feature_map: FeatureMap,
}

impl LabelFrame {
    pub fn new(points: Vec<[f64; 3]>, pose: Matrix4<f64>, camera: CameraModel, feature_map: FeatureMap) -> Result<Self> {
        check_rigid(&pose).map_err(|e| Error::InvalidArgument(format!("pose: {e}")))?;
        camera.validate()?;
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite point".into()));
        }
        Ok(LabelFrame {
            points,
            pose,
            camera,
            feature_map,
        })
    }

    /// The same camera with a camera-from-world extrinsic.
    pub fn world_camera(&self) -> CameraModel {
        let mut cam = self.camera.clone();
        cam.extrinsic = self.camera.extrinsic * crate::types::invert_rigid(&self.pose);
        cam
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoratedPoints {
    pub feature_dim: usize,
    /// `M × C`, zero rows for invisible points
    pub features: Vec<f64>,
    pub visible: Vec<bool>,
}

/// Projects every point into the frame's camera and samples the feature map
/// where it lands.
pub fn decorate_points(frame: &LabelFrame, sampling: Sampling) -> DecoratedPoints {
    let c = frame.feature_map.dim;
    let mut features = vec![0.0; frame.points.len() * c];
    let mut visible = vec![false; frame.points.len()];
    features
        .par_chunks_mut(c)
        .zip(visible.par_iter_mut())
        .zip(frame.points.par_iter())
        .for_each(|((row, vis), p)| {
            let proj = project_point(&Vector3::from(*p), &frame.camera);
            if proj.visible {
                *vis = true;
                let at = frame
                    .feature_map
                    .map_coords(proj.pixel, frame.camera.width, frame.camera.height);
                frame.feature_map.sample(at, sampling, row);
            }
        });
    DecoratedPoints {
        feature_dim: c,
        features,
        visible,
    }
}

/// Concatenates the visible points of each frame, moved to the world frame,
/// in frame order.
pub fn aggregate_decorated(frames: &[LabelFrame], decorated: &[DecoratedPoints]) -> Result<PointCloud> {
    if frames.len() != decorated.len() {
        return Err(Error::shape("one decoration per frame required"));
    }
    let dim = decorated.first().map_or(0, |d| d.feature_dim);
    let mut points = Vec::new();
    let mut features = Vec::new();
    for (i, (frame, dec)) in frames.iter().zip(decorated).enumerate() {
        if dec.feature_dim != dim {
            return Err(Error::shape(format!(
                "frame {i} has feature dim {}, expected {dim}",
                dec.feature_dim
            )));
        }
        if dec.visible.len() != frame.points.len() {
            return Err(Error::shape(format!("frame {i} decoration length differs")));
        }
        for (k, p) in frame.points.iter().enumerate() {
            if dec.visible[k] {
                let w = transform_point(&frame.pose, &Vector3::from(*p));
                points.push([w[0], w[1], w[2]]);
                features.extend_from_slice(&dec.features[k * dim..(k + 1) * dim]);
            }
        }
    }
    PointCloud::new(dim, points, features)
}

/// Decorates all frames in parallel, then aggregates them.
pub fn aggregate_frames(frames: &[LabelFrame], sampling: Sampling) -> Result<PointCloud> {
    let decorated: Vec<DecoratedPoints> = frames.par_iter().map(|f| decorate_points(f, sampling)).collect();
    aggregate_decorated(frames, &decorated)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    /// one-hot of the most frequent per-point argmax channel (lowest index on
    /// ties)
    MajorityVote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelGrid {
    pub spec: VoxelGridSpec,
    pub feature_dim: usize,
    pub occupancy: Vec<bool>,
    /// `N_v × C`, zero rows where unoccupied
    pub features: Vec<f64>,
    pub visibility: Vec<bool>,
    pub point_counts: Vec<u32>,
    /// points falling outside the grid
    pub dropped: usize,
}

impl PseudoLabelGrid {
    pub fn feature_row(&self, v: usize) -> &[f64] {
        &self.features[v * self.feature_dim..(v + 1) * self.feature_dim]
    }

    /// Point counts as density, with features and the occupancy mask.
    /// Visibility is not part of the grid.
    pub fn to_voxel_grid(&self) -> VoxelGrid {
        VoxelGrid {
            spec: self.spec,
            feature_dim: self.feature_dim,
            density: self.point_counts.iter().map(|&n| n as f64).collect(),
            features: Some(self.features.clone()),
            occupancy: Some(self.occupancy.clone()),
        }
    }

    /// Reads back [`PseudoLabelGrid::to_voxel_grid`]; visibility comes back
    /// all-true and `dropped` as 0.
    pub fn from_voxel_grid(grid: &VoxelGrid) -> Result<Self> {
        grid.validate()?;
        let nv = grid.spec.num_voxels();
        let mut point_counts = Vec::with_capacity(nv);
        for (v, &d) in grid.density.iter().enumerate() {
            if !(d >= 0.0 && d.fract() == 0.0 && d <= u32::MAX as f64) {
                return Err(Error::InvalidGrid(format!("voxel {v}: point count {d} is not a whole number")));
            }
            point_counts.push(d as u32);
        }
        let occupancy: Vec<bool> = point_counts.iter().map(|&n| n > 0).collect();
        if grid.occupancy.as_ref().is_some_and(|o| *o != occupancy) {
            return Err(Error::InvalidGrid("occupancy mask disagrees with point counts".into()));
        }
        Ok(PseudoLabelGrid {
            spec: grid.spec,
            feature_dim: grid.feature_dim,
            occupancy,
            features: grid.features.clone().unwrap_or_else(|| vec![0.0; nv * grid.feature_dim]),
            visibility: vec![true; nv],
            point_counts,
            dropped: 0,
        })
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Bins points by `floor((p − origin)/voxel_size)`; points outside the grid
/// are dropped and counted. Visibility is left all-true; see
/// [`compute_visibility_grid`].
pub fn voxelize_labels(cloud: &PointCloud, spec: &VoxelGridSpec, mode: Aggregation) -> PseudoLabelGrid {
    let c = cloud.feature_dim;
    let nv = spec.num_voxels();
    let mut counts = vec![0u32; nv];
    let mut features = vec![0.0; nv * c];
    let mut votes: Vec<u32> = match mode {
        Aggregation::Mean => Vec::new(),
        Aggregation::MajorityVote => vec![0; nv * c],
    };
    let mut dropped = 0;
    for (i, p) in cloud.points.iter().enumerate() {
        let Some([ix, iy, iz]) = spec.voxel_of_point(&Vector3::from(*p)) else {
            dropped += 1;
            continue;
        };
        let v = spec.linear_index(ix, iy, iz);
        counts[v] += 1;
        let f = cloud.feature(i);
        match mode {
            Aggregation::Mean => {
                for (acc, x) in features[v * c..(v + 1) * c].iter_mut().zip(f) {
                    *acc += x;
                }
            }
            Aggregation::MajorityVote if c > 0 => votes[v * c + argmax(f)] += 1,
            Aggregation::MajorityVote => {}
        }
    }
    for v in 0..nv {
        if counts[v] == 0 || c == 0 {
            continue;
        }
        let row = &mut features[v * c..(v + 1) * c];
        match mode {
            Aggregation::Mean => {
                let n = counts[v] as f64;
                row.iter_mut().for_each(|x| *x /= n);
            }
            Aggregation::MajorityVote => {
                let vv = &votes[v * c..(v + 1) * c];
                let mut best = 0;
                for k in 0..c {
                    if vv[k] > vv[best] {
                        best = k;
                    }
                }
                row[best] = 1.0;
            }
        }
    }
    PseudoLabelGrid {
        spec: *spec,
        feature_dim: c,
        occupancy: counts.iter().map(|&n| n > 0).collect(),
        features,
        visibility: vec![true; nv],
        point_counts: counts,
        dropped,
    }
}

/// A voxel is visible iff its center projects into at least one camera with
/// positive depth. Camera extrinsics must map the grid frame to the camera.
pub fn compute_visibility_grid(spec: &VoxelGridSpec, cameras: &[CameraModel]) -> Vec<bool> {
    (0..spec.num_voxels())
        .into_par_iter()
        .map(|v| {
            let x = spec.voxel_center_unchecked(spec.unravel(v));
            cameras.iter().any(|cam| project_point(&x, cam).visible)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LabelConfig {
    pub sampling: Sampling,
    pub aggregation: Aggregation,
}

/// decorate → aggregate → voxelize, with visibility from every frame's
/// camera.
pub fn generate_pseudo_labels(frames: &[LabelFrame], spec: &VoxelGridSpec, cfg: &LabelConfig) -> Result<PseudoLabelGrid> {
    let cloud = aggregate_frames(frames, cfg.sampling)?;
    let mut grid = voxelize_labels(&cloud, spec, cfg.aggregation);
    if cloud.feature_dim == 0 {
        grid.feature_dim = frames.first().map_or(0, |f| f.feature_map.dim);
        grid.features = vec![0.0; spec.num_voxels() * grid.feature_dim];
    }
    let cams: Vec<CameraModel> = frames.iter().map(LabelFrame::world_camera).collect();
    grid.visibility = compute_visibility_grid(spec, &cams);
    Ok(grid)
}
