use std::path::Path;

use g2v_core::io::{load_camera, load_gaussian_set, load_voxel_grid};
use g2v_core::labeler::{FeatureMap, PseudoLabelGrid};
use g2v_core::losses::{
    bce_occupancy_loss, cosine_feature_loss, l1_depth_loss, silog_depth_loss, LossReport, LossWeights,
};
use g2v_core::query::{trajectory_metrics, BevGrid, OutsidePolicy, TrajectoryConfig};
use g2v_core::splat::{compose_supervision_mask, occupancy_mask, OccupancyHeadConfig};
use g2v_core::{render, VoxelGrid};
use serde_json::json;

use super::{head_config, Context};
use crate::args::EvalArgs;
use crate::error::{CliError, CliResult};
use crate::output::{fmt_sci, Table};

fn need<'a, T>(v: &'a Option<T>, flag: &str) -> CliResult<&'a T> {
    v.as_ref().ok_or_else(|| CliError::Usage(format!("--{flag} is required here")))
}

/// Occupancy from the stored mask, or the head on the density.
fn grid_occupancy(grid: &VoxelGrid, head: &OccupancyHeadConfig) -> Vec<bool> {
    grid.occupancy.clone().unwrap_or_else(|| occupancy_mask(grid, head))
}

pub fn run(ctx: &Context, a: &EvalArgs) -> CliResult<()> {
    if a.trajectory {
        trajectory(ctx, a)
    } else {
        losses(ctx, a)
    }
}

/// Occupancy logit of a head output: `ln(o / τ)`, zero at the threshold.
fn occupancy_logit(score: f64, tau: f64) -> f64 {
    (score.max(1e-12) / tau).ln()
}

fn losses(ctx: &Context, a: &EvalArgs) -> CliResult<()> {
    let weights = LossWeights::preset(&a.weights)
        .ok_or_else(|| CliError::Usage(format!("unknown loss weights {:?} (unit, ablation)", a.weights)))?;
    let head = head_config(&a.head)?;
    let mut evaluated = Vec::new();
    let (mut bce3d, mut feat3d) = (0.0, 0.0);
    let (mut feat3d_rows, mut feat3d_excluded) = (0, 0);
    if let Some(grid_path) = &a.grid {
        let pred = load_voxel_grid(grid_path)?;
        let labels = PseudoLabelGrid::from_voxel_grid(&load_voxel_grid(need(&a.labels, "labels")?)?)?;
        if pred.spec != labels.spec {
            return Err(CliError::Validation("prediction and label grids differ".into()));
        }
        if pred.feature_dim != labels.feature_dim {
            return Err(CliError::Validation(format!(
                "prediction has {} channels, labels {}",
                pred.feature_dim, labels.feature_dim
            )));
        }
        let visibility = match &a.visibility {
            Some(p) => {
                let v = load_voxel_grid(p)?;
                if v.spec != pred.spec {
                    return Err(CliError::Validation("visibility grid differs from prediction".into()));
                }
                v.occupancy.clone().unwrap_or_else(|| v.density.iter().map(|&d| d > 0.5).collect())
            }
            None => vec![true; pred.spec.num_voxels()],
        };
        let visible: Vec<usize> = (0..visibility.len()).filter(|&v| visibility[v]).collect();
        let logits: Vec<f64> = visible.iter().map(|&v| occupancy_logit(head.score(pred.density[v]), head.tau)).collect();
        let targets: Vec<bool> = visible.iter().map(|&v| labels.occupancy[v]).collect();
        bce3d = bce_occupancy_loss(&logits, &targets)?.0;
        let pred_occ = occupancy_mask(&pred, &head);
        let mask = compose_supervision_mask(&pred_occ, &labels.occupancy, &visibility)?;
        let features = pred
            .features
            .as_ref()
            .ok_or_else(|| CliError::Validation("prediction grid has no features".into()))?;
        if pred.feature_dim > 0 {
            let c = cosine_feature_loss(features, &labels.features, pred.feature_dim, Some(&mask))?;
            (feat3d, feat3d_rows, feat3d_excluded) = (c.value, c.rows, c.excluded);
        }
        evaluated.extend(["bce3d", "feat3d"]);
    } else if a.labels.is_some() || a.visibility.is_some() {
        return Err(CliError::Usage("--labels and --visibility need --grid".into()));
    }

    let (mut feat2d, mut depth2d, mut silog2d) = (0.0, 0.0, 0.0);
    let (mut feat2d_rows, mut feat2d_excluded, mut depth_pixels) = (0, 0, 0);
    if let Some(set_path) = &a.set {
        if a.target_features.is_none() && a.target_depth.is_none() {
            return Err(CliError::Usage("--set needs --target-features or --target-depth".into()));
        }
        let set = load_gaussian_set(set_path)?;
        let cam = load_camera(need(&a.camera, "camera")?)?;
        let img = render(&set, &cam)?;
        let covered: Vec<bool> = img.alpha_sum.iter().map(|&x| x > 0.0).collect();
        let load_map = |p: &Path, dim: Option<usize>| -> CliResult<FeatureMap> {
            let m = FeatureMap::from_voxel_grid(&load_voxel_grid(p)?)?;
            if m.width != img.width || m.height != img.height || dim.is_some_and(|d| d != m.dim) {
                return Err(CliError::Validation(format!(
                    "{}: {}x{}x{} does not match the {}x{}x{} render",
                    p.display(),
                    m.width,
                    m.height,
                    m.dim,
                    img.width,
                    img.height,
                    dim.unwrap_or(img.feature_dim)
                )));
            }
            Ok(m)
        };
        if let Some(p) = &a.target_features {
            let target = load_map(p, Some(img.feature_dim))?;
            let c = cosine_feature_loss(&img.features, &target.data, img.feature_dim, Some(&covered))?;
            (feat2d, feat2d_rows, feat2d_excluded) = (c.value, c.rows, c.excluded);
            evaluated.push("feat2d");
        }
        if let Some(p) = &a.target_depth {
            let target = load_map(p, Some(1))?;
            let mask: Vec<bool> = (0..covered.len()).map(|i| covered[i] && target.data[i] > 0.0).collect();
            depth_pixels = mask.iter().filter(|&&m| m).count();
            depth2d = l1_depth_loss(&img.depth, &target.data, Some(&mask))?.0;
            silog2d = silog_depth_loss(&img.depth, &target.data, Some(&mask), a.silog_lambda)?.0;
            evaluated.extend(["depth2d", "silog2d"]);
        }
    } else if a.target_features.is_some() || a.target_depth.is_some() {
        return Err(CliError::Usage("image targets need --set and --camera".into()));
    }
    if evaluated.is_empty() {
        return Err(CliError::Usage("--losses needs --grid and --labels, or --set with image targets".into()));
    }

    let report = LossReport::new(feat2d, depth2d, silog2d, bce3d, feat3d, weights);
    ctx.out.record(&json!({
        "command": "eval",
        "mode": "losses",
        "losses": report,
        "evaluated": evaluated,
        "feat3d_rows": feat3d_rows,
        "feat3d_excluded": feat3d_excluded,
        "feat2d_rows": feat2d_rows,
        "feat2d_excluded": feat2d_excluded,
        "depth_pixels": depth_pixels,
    }));
    let mut t = Table::new(&["term", "value", "weight"]).titled(format!("losses ({})", a.weights));
    for (name, v, w) in [
        ("feat2d", report.feat2d, weights.feat2d),
        ("depth2d", report.depth2d, weights.depth2d),
        ("silog2d", report.silog2d, weights.silog2d),
        ("bce3d", report.bce3d, weights.bce3d),
        ("feat3d", report.feat3d, weights.feat3d),
    ] {
        let shown = if evaluated.contains(&name) { fmt_sci(v) } else { "-".into() };
        t.row(vec![name.into(), shown, format!("{w}")]);
    }
    t.row(vec!["total".into(), fmt_sci(report.total), String::new()]);
    ctx.out.table(&t);
    Ok(())
}

/// `x y` per line; `#` comments.
pub fn parse_waypoints(text: &str) -> CliResult<Vec<[f64; 2]>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Validation(format!("waypoint line {}: {e}", i + 1)))?;
        if v.len() != 2 {
            return Err(CliError::Validation(format!("waypoint line {}: expected `x y`", i + 1)));
        }
        out.push([v[0], v[1]]);
    }
    Ok(out)
}

fn load_waypoints(p: &Path) -> CliResult<Vec<[f64; 2]>> {
    let text = std::fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
    parse_waypoints(&text)
}

fn trajectory(ctx: &Context, a: &EvalArgs) -> CliResult<()> {
    let pred = load_waypoints(need(&a.pred, "pred")?)?;
    let gt = load_waypoints(need(&a.gt, "gt")?)?;
    let grid = load_voxel_grid(need(&a.obstacles, "obstacles")?)?;
    let bev = BevGrid::from_occupancy(&grid.spec, &grid_occupancy(&grid, &head_config(&a.head)?))?;
    let cfg = TrajectoryConfig {
        ego_length: a.ego_length,
        ego_width: a.ego_width,
        outside: if a.outside_collision {
            OutsidePolicy::Collision
        } else {
            OutsidePolicy::NoCollision
        },
    };
    let m = trajectory_metrics(&pred, &gt, &bev, &cfg)?;
    ctx.out.record(&json!({
        "command": "eval",
        "mode": "trajectory",
        "waypoints": pred.len(),
        "l2": m.l2,
        "collisions": m.collisions,
        "collision_rate": m.collision_rate,
        "outside": m.outside,
    }));
    let mut t = Table::new(&["horizon", "L2", "collision"]).titled("trajectory");
    for k in 0..m.l2.len() {
        t.row(vec![(k + 1).to_string(), format!("{:.4}", m.l2[k]), m.collisions[k].to_string()]);
    }
    t.row(vec!["rate".into(), String::new(), format!("{:.4}", m.collision_rate)]);
    ctx.out.table(&t);
    Ok(())
}
