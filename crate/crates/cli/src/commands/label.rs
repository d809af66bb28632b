use g2v_core::io::{encode_voxel_grid, load_camera, load_point_cloud, load_pose, load_voxel_grid};
use g2v_core::labeler::{generate_pseudo_labels, Aggregation, FeatureMap, LabelConfig, LabelFrame, Sampling};
use g2v_core::VoxelGrid;
use serde_json::json;

use super::{write_bytes, Context};
use crate::args::{AggregationArg, LabelArgs, SamplingArg};
use crate::error::{CliError, CliResult};
use crate::manifest::{keyframes, parse_manifest, FrameEntry};
use crate::output::{digest_f64, Table};

fn ctx(p: &std::path::Path) -> impl Fn(g2v_core::Error) -> CliError + '_ {
    move |err| CliError::Validation(format!("{}: {err}", p.display()))
}

fn load_frame(e: &FrameEntry) -> CliResult<LabelFrame> {
    let cloud = load_point_cloud(&e.points)?;
    let pose = load_pose(&e.pose)?;
    let camera = load_camera(&e.camera)?;
    let map = FeatureMap::from_voxel_grid(&load_voxel_grid(&e.features)?).map_err(ctx(&e.features))?;
    Ok(LabelFrame::new(cloud.points, pose, camera, map)?)
}

pub fn run(ctx: &Context, a: &LabelArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.frames)
        .map_err(|e| CliError::Validation(format!("{}: {e}", a.frames.display())))?;
    let base = a.frames.parent().unwrap_or(std::path::Path::new("."));
    let entries = parse_manifest(&text, base)?;
    if entries.is_empty() {
        return Err(CliError::Validation("manifest lists no frames".into()));
    }
    let kept = match a.keyframe_hz {
        Some(hz) => keyframes(&entries, hz)?,
        None => (0..entries.len()).collect(),
    };
    let frames = kept.iter().map(|&i| load_frame(&entries[i])).collect::<CliResult<Vec<_>>>()?;
    let spec = a.grid.spec("custom")?;
    let cfg = LabelConfig {
        sampling: match a.sampling {
            SamplingArg::Bilinear => Sampling::Bilinear,
            SamplingArg::Nearest => Sampling::Nearest,
        },
        aggregation: match a.aggregation {
            AggregationArg::Mean => Aggregation::Mean,
            AggregationArg::Vote => Aggregation::MajorityVote,
        },
    };
    let labels = generate_pseudo_labels(&frames, &spec, &cfg)?;
    let grid = labels.to_voxel_grid();
    let file_sha = write_bytes(&a.out, &encode_voxel_grid(&grid)?)?;
    if let Some(p) = &a.out_visibility {
        let vis = VoxelGrid {
            spec,
            feature_dim: 0,
            density: labels.visibility.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
            features: None,
            occupancy: Some(labels.visibility.clone()),
        };
        write_bytes(p, &encode_voxel_grid(&vis)?)?;
    }
    let points: u64 = labels.point_counts.iter().map(|&n| n as u64).sum();
    let occupied = labels.occupancy.iter().filter(|&&o| o).count();
    let visible = labels.visibility.iter().filter(|&&v| v).count();
    let counts: Vec<f64> = labels.point_counts.iter().map(|&n| n as f64).collect();
    let vis: Vec<f64> = labels.visibility.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    ctx.out.record(&json!({
        "command": "label",
        "frames": entries.len(),
        "keyframes": kept.len(),
        "points_in_grid": points,
        "points_dropped": labels.dropped,
        "occupied": occupied,
        "visible": visible,
        "labels_sha256": digest_f64(&[&counts, &labels.features, &vis]),
        "file_sha256": file_sha,
    }));
    let mut t = Table::new(&["quantity", "value"]).titled("pseudo labels");
    t.row(vec!["frames".into(), format!("{} of {}", kept.len(), entries.len())]);
    t.row(vec!["points in grid".into(), points.to_string()]);
    t.row(vec!["points dropped".into(), labels.dropped.to_string()]);
    t.row(vec!["occupied voxels".into(), occupied.to_string()]);
    t.row(vec!["visible voxels".into(), visible.to_string()]);
    ctx.out.table(&t);
    Ok(())
}
