//! Seeded synthetic scenes for tests, benchmarks and demos.

use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::project_point;
use crate::labeler::{FeatureMap, LabelFrame, PseudoLabelGrid};
use crate::query::TextEmbeddingBank;
use crate::types::{invert_rigid, transform_point, CameraModel, Gaussian, GaussianSet, VoxelGridSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform unit quaternion (rejection sampling in the 4-ball).
pub fn random_quat<R: Rng>(rng: &mut R) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|v| v * v).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            return q.map(|v| v / n);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub num_gaussians: usize,
    pub feature_dim: usize,
    /// per-axis standard deviation range, in voxels
    pub scale_voxels: (f64, f64),
    pub opacity: (f64, f64),
    /// how many Gaussians to center just outside the grid, within reach of it
    pub outside: usize,
}

impl SceneConfig {
    pub fn new(num_gaussians: usize, feature_dim: usize) -> Self {
        SceneConfig {
            num_gaussians,
            feature_dim,
            scale_voxels: (0.4, 2.0),
            opacity: (0.05, 1.0),
            outside: 0,
        }
    }
}

/// Random anisotropic Gaussians with means uniform over the grid box (the
/// first `cfg.outside` are pushed past a random face by less than 1.5 of
/// their smallest standard deviation) and features uniform in `[-1, 1]`.
pub fn random_scene(seed: u64, spec: &VoxelGridSpec, cfg: &SceneConfig) -> Result<GaussianSet> {
    if cfg.outside > cfg.num_gaussians {
        return Err(Error::InvalidArgument("more outside Gaussians than Gaussians".into()));
    }
    let mut rng = rng(seed);
    let lo = spec.origin;
    let hi = spec.max_corner();
    let vs = spec.voxel_size;
    let mut gaussians = Vec::with_capacity(cfg.num_gaussians);
    for i in 0..cfg.num_gaussians {
        let scale: [f64; 3] =
            std::array::from_fn(|_| vs * rng.random_range(cfg.scale_voxels.0..=cfg.scale_voxels.1));
        let mut mean: [f64; 3] = std::array::from_fn(|k| rng.random_range(lo[k]..hi[k]));
        if i < cfg.outside {
            let axis = rng.random_range(0..3);
            let min_scale = scale.iter().cloned().fold(f64::INFINITY, f64::min);
            let push = rng.random_range(0.05..1.5) * min_scale;
            mean[axis] = if rng.random_bool(0.5) {
                lo[axis] - push
            } else {
                hi[axis] + push
            };
        }
        gaussians.push(Gaussian {
            mean,
            quat: random_quat(&mut rng),
            scale,
            opacity: rng.random_range(cfg.opacity.0..=cfg.opacity.1),
            feature: (0..cfg.feature_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        });
    }
    GaussianSet::from_gaussians(cfg.feature_dim, gaussians)
}

/// `len` values uniform in `[-1, 1]`.
pub fn random_upstream(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// World-from-camera transform for a camera at `eye` looking at `target`
/// (camera x right, y down, z forward; world z up).
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Result<Matrix4<f64>> {
    let forward = (target - eye)
        .try_normalize(1e-12)
        .ok_or_else(|| Error::InvalidArgument("eye and target coincide".into()))?;
    let right = forward
        .cross(&Vector3::z())
        .try_normalize(1e-9)
        .ok_or_else(|| Error::InvalidArgument("view direction is vertical".into()))?;
    let down = forward.cross(&right);
    let r = Matrix3::from_columns(&[right, down, forward]);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&eye);
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub class: u32,
}

impl LabeledBox {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

/// Up to `count` non-overlapping voxel-aligned boxes, 2 to 5 voxels per side
/// and at least one voxel apart, cycling through `num_classes` classes.
/// Placement gives up on a box after 100 rejected draws.
pub fn random_boxes(seed: u64, spec: &VoxelGridSpec, count: usize, num_classes: u32) -> Vec<LabeledBox> {
    let mut rng = rng(seed);
    let vs = spec.voxel_size;
    let mut cells: Vec<([usize; 3], [usize; 3])> = Vec::new();
    let mut out = Vec::new();
    for b in 0..count {
        for _ in 0..100 {
            let size: [usize; 3] = std::array::from_fn(|k| rng.random_range(2..=5).min(spec.dims[k]));
            let lo: [usize; 3] = std::array::from_fn(|k| rng.random_range(0..=spec.dims[k] - size[k]));
            let hi: [usize; 3] = std::array::from_fn(|k| lo[k] + size[k]);
            let clear = cells
                .iter()
                .all(|(a, b)| (0..3).any(|k| hi[k] < a[k] || b[k] < lo[k]));
            if !clear {
                continue;
            }
            cells.push((lo, hi));
            // faces sit a quarter voxel inside the cell boundaries
            out.push(LabeledBox {
                min: std::array::from_fn(|k| spec.origin[k] + (lo[k] as f64 + 0.25) * vs),
                max: std::array::from_fn(|k| spec.origin[k] + (hi[k] as f64 - 0.25) * vs),
                class: b as u32 % num_classes.max(1),
            });
            break;
        }
    }
    out
}

/// Boxes, one posed frame per box, and the ground-truth labels.
#[derive(Debug, Clone)]
pub struct BoxWorld {
    pub spec: VoxelGridSpec,
    pub boxes: Vec<LabeledBox>,
    pub frames: Vec<LabelFrame>,
    /// class of the box containing each voxel center
    pub gt: Vec<Option<u32>>,
}

const BOX_IMAGE: usize = 64;

/// Builds a scene of class-labeled boxes. Every voxel whose center lies in a
/// box gets `points_per_voxel` jittered lidar returns; box `i` is observed by
/// frame `i` only (a range-limited sweep), whose camera looks at the box
/// from outside and whose feature map paints each hit pixel with the class
/// embedding of the nearest return.
pub fn box_world(
    seed: u64,
    spec: &VoxelGridSpec,
    boxes: &[LabeledBox],
    bank: &TextEmbeddingBank,
    points_per_voxel: usize,
) -> Result<BoxWorld> {
    let mut rng = rng(seed);
    let nv = spec.num_voxels();
    let mut gt = vec![None; nv];
    let mut frames = Vec::with_capacity(boxes.len());
    for b in boxes {
        if b.class as usize >= bank.num_classes() {
            return Err(Error::OutOfRange(format!("box class {}", b.class)));
        }
        let mut world_points = Vec::new();
        for v in 0..nv {
            let x = spec.voxel_center_unchecked(spec.unravel(v));
            if !b.contains(&x) {
                continue;
            }
            if gt[v].is_some() {
                return Err(Error::InvalidArgument("boxes overlap".into()));
            }
            gt[v] = Some(b.class);
            for _ in 0..points_per_voxel {
                let j = Vector3::from_fn(|_, _| rng.random_range(-0.25..0.25) * spec.voxel_size);
                world_points.push(x + j);
            }
        }
        let center = Vector3::from_fn(|k, _| 0.5 * (b.min[k] + b.max[k]));
        let half = Vector3::from_fn(|k, _| 0.5 * (b.max[k] - b.min[k])).norm() + spec.voxel_size;
        let yaw = rng.random_range(0.0..std::f64::consts::TAU);
        let dir = Vector3::new(yaw.cos(), yaw.sin(), 0.3).normalize();
        let pose = look_at(center + dir * (3.0 * half), center)?;
        let f = 0.5 * BOX_IMAGE as f64;
        let cam = CameraModel::pinhole(f, f, f, BOX_IMAGE, BOX_IMAGE)?;
        let sensor_from_world = invert_rigid(&pose);
        let points: Vec<[f64; 3]> = world_points
            .iter()
            .map(|p| {
                let q = transform_point(&sensor_from_world, p);
                [q[0], q[1], q[2]]
            })
            .collect();
        let mut map = FeatureMap::zeros(BOX_IMAGE, BOX_IMAGE, bank.dim())?;
        let mut zbuf = vec![f64::INFINITY; BOX_IMAGE * BOX_IMAGE];
        for p in &points {
            let proj = project_point(&Vector3::from(*p), &cam);
            if !proj.visible {
                return Err(Error::InvalidArgument("box does not fit its camera".into()));
            }
            let at = map.map_coords(proj.pixel, BOX_IMAGE, BOX_IMAGE);
            let x = ((at[0] + 0.5).floor() as usize).min(BOX_IMAGE - 1);
            let y = ((at[1] + 0.5).floor() as usize).min(BOX_IMAGE - 1);
            if proj.depth < zbuf[y * BOX_IMAGE + x] {
                zbuf[y * BOX_IMAGE + x] = proj.depth;
                map.node_mut(x, y).copy_from_slice(bank.row(b.class as usize));
            }
        }
        frames.push(LabelFrame::new(points, pose, cam, map)?);
    }
    Ok(BoxWorld {
        spec: *spec,
        boxes: boxes.to_vec(),
        frames,
        gt,
    })
}

/// One isotropic Gaussian per occupied voxel at its center, carrying the
/// voxel's feature. With `sigma_voxels < 1/3` the 3σ support never reaches
/// another voxel center.
pub fn voxel_gaussians(labels: &PseudoLabelGrid, sigma_voxels: f64, opacity: f64) -> Result<GaussianSet> {
    let spec = &labels.spec;
    let mut out = Vec::new();
    for v in 0..spec.num_voxels() {
        if labels.occupancy[v] {
            let x = spec.voxel_center_unchecked(spec.unravel(v));
            out.push(Gaussian::isotropic(
                [x[0], x[1], x[2]],
                sigma_voxels * spec.voxel_size,
                opacity,
                labels.feature_row(v).to_vec(),
            ));
        }
    }
    GaussianSet::from_gaussians(labels.feature_dim, out)
}
