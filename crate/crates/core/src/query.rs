//! Open-vocabulary querying of splatted features and the evaluation metrics.

use rayon::prelude::*;

use crate::binning::build_dual_csr_prepared;
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_RADIUS_SIGMAS;
use crate::prepared::PreparedGaussians;
use crate::splat::{occupancy_mask, splat_forward_prepared, OccupancyHeadConfig};
use crate::types::{GaussianSet, VoxelGrid, VoxelGridSpec};

/// Class names with one embedding row each, `N_c × C` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbeddingBank {
    names: Vec<String>,
    dim: usize,
    matrix: Vec<f64>,
}

impl TextEmbeddingBank {
    pub fn new(names: Vec<String>, dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be positive".into()));
        }
        if matrix.len() != names.len() * dim {
            return Err(Error::shape(format!(
                "{} classes of dim {dim} need {} values, got {}",
                names.len(),
                names.len() * dim,
                matrix.len()
            )));
        }
        for (k, row) in matrix.chunks_exact(dim).enumerate() {
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("class {k} has non-finite entries")));
            }
            if row.iter().all(|&x| x == 0.0) {
                return Err(Error::InvalidArgument(format!("class {k} has a zero embedding")));
            }
        }
        Ok(TextEmbeddingBank { names, dim, matrix })
    }

    /// `N_c` one-hot rows of dimension `dim` (`dim ≥ N_c`).
    pub fn one_hot(names: Vec<String>, dim: usize) -> Result<Self> {
        if names.len() > dim {
            return Err(Error::InvalidArgument(format!(
                "{} one-hot classes do not fit in dim {dim}",
                names.len()
            )));
        }
        let mut matrix = vec![0.0; names.len() * dim];
        for k in 0..names.len() {
            matrix[k * dim + k] = 1.0;
        }
        Self::new(names, dim, matrix)
    }

    pub fn num_classes(&self) -> usize {
        self.names.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.matrix[k * self.dim..(k + 1) * self.dim]
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Row-softmax probabilities `M × N_c` plus the number of zero-norm rows,
/// which get the uniform distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticLogits {
    pub num_classes: usize,
    pub probabilities: Vec<f64>,
    pub zero_norm_rows: usize,
}

impl SemanticLogits {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.probabilities[i * self.num_classes..(i + 1) * self.num_classes]
    }

    /// First index of the row maximum.
    pub fn argmax(&self, i: usize) -> usize {
        argmax(self.row(i))
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = k;
        }
    }
    best
}

fn softmax_cosine_row(feature: &[f64], bank: &TextEmbeddingBank, bank_norms: &[f64], temperature: f64, out: &mut [f64]) -> bool {
    let n = norm(feature);
    if n == 0.0 || !n.is_finite() {
        out.fill(1.0 / out.len() as f64);
        return false;
    }
    for (k, o) in out.iter_mut().enumerate() {
        let dot: f64 = feature.iter().zip(bank.row(k)).map(|(a, b)| a * b).sum();
        *o = dot / (n * bank_norms[k]) / temperature;
    }
    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    true
}

/// `softmax(cos(f, f_txt) / T)` per row of `features` (`M × C`).
pub fn semantic_logits(features: &[f64], bank: &TextEmbeddingBank, temperature: f64) -> Result<SemanticLogits> {
    let c = bank.dim();
    if features.len() % c != 0 {
        return Err(Error::shape(format!(
            "feature buffer of {} values is not a multiple of dim {c}",
            features.len()
        )));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature {temperature} must be positive")));
    }
    let nc = bank.num_classes();
    if nc == 0 {
        return Err(Error::InvalidArgument("embedding bank is empty".into()));
    }
    let bank_norms: Vec<f64> = (0..nc).map(|k| norm(bank.row(k))).collect();
    let m = features.len() / c;
    let mut probabilities = vec![0.0; m * nc];
    let zero_norm_rows = probabilities
        .par_chunks_mut(nc)
        .zip(features.par_chunks(c))
        .map(|(out, f)| usize::from(!softmax_cosine_row(f, bank, &bank_norms, temperature, out)))
        .sum();
    Ok(SemanticLogits {
        num_classes: nc,
        probabilities,
        zero_norm_rows,
    })
}

/// Per-voxel class labels; `None` is empty space.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGrid {
    pub spec: VoxelGridSpec,
    pub num_classes: usize,
    pub labels: Vec<Option<u32>>,
    /// `N_v × N_c` probabilities, zero rows for empty voxels
    pub probabilities: Option<Vec<f64>>,
}

impl SemanticGrid {
    pub fn new(spec: VoxelGridSpec, num_classes: usize, labels: Vec<Option<u32>>) -> Result<Self> {
        if labels.len() != spec.num_voxels() {
            return Err(Error::shape(format!(
                "{} labels for {} voxels",
                labels.len(),
                spec.num_voxels()
            )));
        }
        if let Some(bad) = labels.iter().flatten().find(|&&k| k as usize >= num_classes) {
            return Err(Error::OutOfRange(format!("class id {bad} ≥ {num_classes}")));
        }
        Ok(SemanticGrid {
            spec,
            num_classes,
            labels,
            probabilities: None,
        })
    }

    pub fn occupancy(&self) -> Vec<bool> {
        self.labels.iter().map(Option::is_some).collect()
    }

    /// One-hot features over `num_classes` channels with the occupancy mask
    /// and a 1/0 density.
    pub fn to_voxel_grid(&self) -> VoxelGrid {
        let nc = self.num_classes;
        let mut features = vec![0.0; self.labels.len() * nc];
        for (v, l) in self.labels.iter().enumerate() {
            if let Some(k) = l {
                features[v * nc + *k as usize] = 1.0;
            }
        }
        VoxelGrid {
            spec: self.spec,
            feature_dim: nc,
            density: self.labels.iter().map(|l| if l.is_some() { 1.0 } else { 0.0 }).collect(),
            features: Some(features),
            occupancy: Some(self.occupancy()),
        }
    }

    /// Inverse of [`SemanticGrid::to_voxel_grid`]: occupied voxels (the
    /// occupancy mask, or density above 0.5 without one) take the argmax
    /// channel of their feature row.
    pub fn from_voxel_grid(grid: &VoxelGrid) -> Result<Self> {
        let features = grid
            .features
            .as_ref()
            .ok_or_else(|| Error::shape("label grid carries no features"))?;
        let nc = grid.feature_dim;
        if nc == 0 {
            return Err(Error::shape("label grid has no class channels"));
        }
        let labels = (0..grid.spec.num_voxels())
            .map(|v| {
                let occupied = match &grid.occupancy {
                    Some(o) => o[v],
                    None => grid.density[v] > 0.5,
                };
                occupied.then(|| argmax(&features[v * nc..(v + 1) * nc]) as u32)
            })
            .collect();
        Self::new(grid.spec, nc, labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryConfig {
    pub head: OccupancyHeadConfig,
    pub temperature: f64,
    pub radius_sigmas: f64,
    pub keep_probabilities: bool,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            head: OccupancyHeadConfig::default(),
            temperature: 1.0,
            radius_sigmas: DEFAULT_RADIUS_SIGMAS,
            keep_probabilities: false,
        }
    }
}

/// Splat, threshold the density with the occupancy head, and label every
/// occupied voxel with the argmax class of its normalized feature.
pub fn semantic_occupancy(
    set: &GaussianSet,
    bank: &TextEmbeddingBank,
    spec: &VoxelGridSpec,
    cfg: &QueryConfig,
) -> Result<SemanticGrid> {
    if set.feature_dim() != bank.dim() {
        return Err(Error::shape(format!(
            "Gaussian feature dim {} differs from embedding dim {}",
            set.feature_dim(),
            bank.dim()
        )));
    }
    let prep = PreparedGaussians::from_set(set)?;
    let csr = build_dual_csr_prepared(&prep, spec, cfg.radius_sigmas)?;
    let out = splat_forward_prepared(&prep, &csr, spec)?;
    semantic_grid_from_voxels(&out.grid, bank, cfg)
}

/// Labels an already splatted grid: occupancy head on the density, argmax
/// class of the feature row where occupied.
pub fn semantic_grid_from_voxels(grid: &VoxelGrid, bank: &TextEmbeddingBank, cfg: &QueryConfig) -> Result<SemanticGrid> {
    if grid.feature_dim != bank.dim() {
        return Err(Error::shape(format!(
            "grid feature dim {} differs from embedding dim {}",
            grid.feature_dim,
            bank.dim()
        )));
    }
    let features = grid
        .features
        .as_ref()
        .ok_or_else(|| Error::shape("grid carries no features"))?;
    let spec = &grid.spec;
    let mask = occupancy_mask(grid, &cfg.head);
    let occupied: Vec<usize> = (0..mask.len()).filter(|&v| mask[v]).collect();
    let c = bank.dim();
    let mut rows = Vec::with_capacity(occupied.len() * c);
    for &v in &occupied {
        rows.extend_from_slice(&features[v * c..(v + 1) * c]);
    }
    let logits = semantic_logits(&rows, bank, cfg.temperature)?;
    let nc = bank.num_classes();
    let mut labels = vec![None; spec.num_voxels()];
    let mut probabilities = cfg.keep_probabilities.then(|| vec![0.0; spec.num_voxels() * nc]);
    for (i, &v) in occupied.iter().enumerate() {
        labels[v] = Some(logits.argmax(i) as u32);
        if let Some(p) = probabilities.as_mut() {
            p[v * nc..(v + 1) * nc].copy_from_slice(logits.row(i));
        }
    }
    Ok(SemanticGrid {
        spec: *spec,
        num_classes: nc,
        labels,
        probabilities,
    })
}

/// Which classes enter the mIoU mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MiouAveraging {
    /// classes with at least one ground-truth voxel
    #[default]
    GroundTruth,
    /// classes present in ground truth or prediction
    Union,
    /// every class; a class absent from both counts as IoU 1
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn union(&self) -> u64 {
        self.tp + self.fp + self.fn_
    }

    /// `tp / (tp + fp + fn)`, `None` for an empty union.
    pub fn iou(&self) -> Option<f64> {
        let u = self.union();
        (u > 0).then(|| self.tp as f64 / u as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    pub binary: ConfusionCounts,
    /// binary occupancy IoU; 1 when both grids are empty
    pub iou: f64,
    pub per_class: Vec<ConfusionCounts>,
    pub per_class_iou: Vec<Option<f64>>,
    /// `None` when no class qualifies for averaging
    pub miou: Option<f64>,
    pub averaged_classes: usize,
}

/// Binary and per-class IoU over the voxels selected by `eval_mask`
/// (all voxels when `None`).
pub fn iou_miou(
    pred: &SemanticGrid,
    gt: &SemanticGrid,
    eval_mask: Option<&[bool]>,
    averaging: MiouAveraging,
) -> Result<IouReport> {
    if pred.spec != gt.spec {
        return Err(Error::shape("prediction and ground truth grids differ"));
    }
    if pred.labels.len() != gt.labels.len() {
        return Err(Error::shape("label counts differ"));
    }
    if let Some(m) = eval_mask {
        if m.len() != gt.labels.len() {
            return Err(Error::shape("evaluation mask length differs from grid"));
        }
    }
    let nc = pred.num_classes.max(gt.num_classes);
    let mut binary = ConfusionCounts::default();
    let mut per_class = vec![ConfusionCounts::default(); nc];
    let mut gt_present = vec![false; nc];
    for v in 0..gt.labels.len() {
        if eval_mask.is_some_and(|m| !m[v]) {
            continue;
        }
        let (p, g) = (pred.labels[v], gt.labels[v]);
        match (p.is_some(), g.is_some()) {
            (true, true) => binary.tp += 1,
            (true, false) => binary.fp += 1,
            (false, true) => binary.fn_ += 1,
            (false, false) => {}
        }
        if let Some(g) = g {
            gt_present[g as usize] = true;
        }
        match (p, g) {
            (Some(a), Some(b)) if a == b => per_class[a as usize].tp += 1,
            _ => {
                if let Some(a) = p {
                    per_class[a as usize].fp += 1;
                }
                if let Some(b) = g {
                    per_class[b as usize].fn_ += 1;
                }
            }
        }
    }
    let per_class_iou: Vec<Option<f64>> = per_class.iter().map(ConfusionCounts::iou).collect();
    let mut sum = 0.0;
    let mut count = 0;
    for k in 0..nc {
        let include = match averaging {
            MiouAveraging::GroundTruth => gt_present[k],
            MiouAveraging::Union => per_class[k].union() > 0,
            MiouAveraging::All => true,
        };
        if include {
            sum += per_class_iou[k].unwrap_or(1.0);
            count += 1;
        }
    }
    Ok(IouReport {
        binary,
        iou: binary.iou().unwrap_or(1.0),
        per_class,
        per_class_iou,
        miou: (count > 0).then(|| sum / count as f64),
        averaged_classes: count,
    })
}

/// Top-down obstacle grid, x-fastest, cell `(i, j)` covering
/// `[origin + i·cell, origin + (i+1)·cell)` in x and likewise in y.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    pub origin: [f64; 2],
    pub dims: [usize; 2],
    pub cell_size: f64,
    pub occupied: Vec<bool>,
}

impl BevGrid {
    pub fn new(origin: [f64; 2], dims: [usize; 2], cell_size: f64, occupied: Vec<bool>) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidGrid(format!("cell size {cell_size} must be positive")));
        }
        if occupied.len() != dims[0] * dims[1] {
            return Err(Error::shape("occupancy length differs from dims"));
        }
        Ok(BevGrid {
            origin,
            dims,
            cell_size,
            occupied,
        })
    }

    /// Column-wise OR of a 3D occupancy over z.
    pub fn from_occupancy(spec: &VoxelGridSpec, occupancy: &[bool]) -> Result<Self> {
        if occupancy.len() != spec.num_voxels() {
            return Err(Error::shape("occupancy length differs from grid"));
        }
        let [nx, ny, nz] = spec.dims;
        let mut occupied = vec![false; nx * ny];
        for iz in 0..nz {
            for j in 0..nx * ny {
                occupied[j] |= occupancy[iz * nx * ny + j];
            }
        }
        Self::new([spec.origin[0], spec.origin[1]], [nx, ny], spec.voxel_size, occupied)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.cell_size,
            self.origin[1] + (j as f64 + 0.5) * self.cell_size,
        ]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|k| {
            p[k] >= self.origin[k] && p[k] < self.origin[k] + self.dims[k] as f64 * self.cell_size
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutsidePolicy {
    #[default]
    NoCollision,
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    /// along the heading, meters
    pub ego_length: f64,
    /// across the heading, meters
    pub ego_width: f64,
    pub outside: OutsidePolicy,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            ego_length: 4.1,
            ego_width: 1.7,
            outside: OutsidePolicy::NoCollision,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMetrics {
    /// distance at each waypoint
    pub distances: Vec<f64>,
    /// `l2[t]` = mean distance over waypoints `0..=t`
    pub l2: Vec<f64>,
    pub collisions: Vec<bool>,
    pub collision_rate: f64,
    /// waypoints whose center lies outside the obstacle grid
    pub outside: Vec<usize>,
}

/// Heading used for the footprint at waypoint `t`: toward the next waypoint,
/// or from the previous one at the end; `+x` when both are degenerate.
fn heading(path: &[[f64; 2]], t: usize) -> f64 {
    let seg = |a: [f64; 2], b: [f64; 2]| {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        (dx != 0.0 || dy != 0.0).then(|| dy.atan2(dx))
    };
    let fwd = (t + 1 < path.len()).then(|| seg(path[t], path[t + 1])).flatten();
    let back = (t > 0).then(|| seg(path[t - 1], path[t])).flatten();
    fwd.or(back).unwrap_or(0.0)
}

/// Whether the oriented ego rectangle centered at `p` covers any obstacle
/// cell center.
pub fn footprint_collides(grid: &BevGrid, p: [f64; 2], yaw: f64, length: f64, width: f64) -> bool {
    let (s, c) = yaw.sin_cos();
    let (hl, hw) = (0.5 * length, 0.5 * width);
    let reach = (hl * hl + hw * hw).sqrt();
    let cell_range = |k: usize| {
        let lo = ((p[k] - reach - grid.origin[k]) / grid.cell_size - 0.5).floor().max(0.0) as usize;
        let hi = ((p[k] + reach - grid.origin[k]) / grid.cell_size + 0.5).ceil();
        let hi = (hi.max(0.0) as usize).min(grid.dims[k]);
        lo..hi
    };
    for j in cell_range(1) {
        for i in cell_range(0) {
            if !grid.occupied[j * grid.dims[0] + i] {
                continue;
            }
            let q = grid.cell_center(i, j);
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            let along = c * dx + s * dy;
            let across = -s * dx + c * dy;
            if along.abs() <= hl && across.abs() <= hw {
                return true;
            }
        }
    }
    false
}

/// L2 per horizon and collision rate of `pred` against `gt`; the footprint
/// is evaluated along `pred`.
pub fn trajectory_metrics(
    pred: &[[f64; 2]],
    gt: &[[f64; 2]],
    obstacles: &BevGrid,
    cfg: &TrajectoryConfig,
) -> Result<TrajectoryMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::shape(format!(
            "trajectories have {} and {} waypoints",
            pred.len(),
            gt.len()
        )));
    }
    if pred.iter().chain(gt).flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite waypoint".into()));
    }
    let distances: Vec<f64> = pred
        .iter()
        .zip(gt)
        .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
        .collect();
    let mut l2 = Vec::with_capacity(distances.len());
    let mut acc = 0.0;
    for (t, d) in distances.iter().enumerate() {
        acc += d;
        l2.push(acc / (t + 1) as f64);
    }
    let mut outside = Vec::new();
    let collisions: Vec<bool> = (0..pred.len())
        .map(|t| {
            if !obstacles.contains(pred[t]) {
                outside.push(t);
                return cfg.outside == OutsidePolicy::Collision;
            }
            footprint_collides(obstacles, pred[t], heading(pred, t), cfg.ego_length, cfg.ego_width)
        })
        .collect();
    let hits = collisions.iter().filter(|&&c| c).count();
    let collision_rate = if pred.is_empty() {
        0.0
    } else {
        hits as f64 / pred.len() as f64
    };
    Ok(TrajectoryMetrics {
        distances,
        l2,
        collisions,
        collision_rate,
        outside,
    })
}
