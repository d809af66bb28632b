use g2v_core::io::{
    encode_embedding_bank, encode_gaussian_set, encode_point_cloud, encode_voxel_grid, format_camera, format_pose,
    load_voxel_grid,
};
use g2v_core::labeler::PseudoLabelGrid;
use g2v_core::synth::{box_world, random_boxes, random_scene, voxel_gaussians, SceneConfig};
use g2v_core::{PointCloud, SemanticGrid, TextEmbeddingBank};
use serde_json::json;

use super::bench::scene_hash;
use super::{write_bytes, Context};
use crate::args::{SynthBoxesArgs, SynthCommand, SynthFromLabelsArgs, SynthSceneArgs};
use crate::error::{CliError, CliResult};
use crate::output::Table;

pub fn run(ctx: &Context, cmd: &SynthCommand) -> CliResult<()> {
    match cmd {
        SynthCommand::Scene(a) => scene(ctx, a),
        SynthCommand::Boxes(a) => boxes(ctx, a),
        SynthCommand::FromLabels(a) => from_labels(ctx, a),
    }
}

fn scene(ctx: &Context, a: &SynthSceneArgs) -> CliResult<()> {
    let spec = a.grid.spec("nuscenes")?;
    let mut cfg = SceneConfig::new(a.n, a.c);
    cfg.scale_voxels = (a.scale_min, a.scale_max);
    cfg.outside = a.outside;
    if !(a.scale_min > 0.0 && a.scale_min <= a.scale_max) {
        return Err(CliError::Validation("need 0 < scale-min ≤ scale-max".into()));
    }
    let set = random_scene(ctx.seed, &spec, &cfg)?;
    let file_sha = write_bytes(&a.out, &encode_gaussian_set(&set)?)?;
    ctx.out.record(&json!({
        "command": "synth-scene",
        "gaussians": set.len(),
        "feature_dim": set.feature_dim(),
        "scene_sha256": scene_hash(&set),
        "file_sha256": file_sha,
    }));
    let mut t = Table::new(&["quantity", "value"]).titled("synthetic scene");
    t.row(vec!["gaussians".into(), set.len().to_string()]);
    t.row(vec!["feature dim".into(), set.feature_dim().to_string()]);
    ctx.out.table(&t);
    Ok(())
}

fn boxes(ctx: &Context, a: &SynthBoxesArgs) -> CliResult<()> {
    if a.classes == 0 {
        return Err(CliError::Validation("need at least one class".into()));
    }
    let spec = a.grid.spec("custom")?;
    let dir = &a.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))?;
    let placed = random_boxes(ctx.seed, &spec, a.boxes, a.classes);
    let names = (0..a.classes).map(|k| format!("class{k}")).collect();
    let bank = TextEmbeddingBank::one_hot(names, a.classes as usize)?;
    let world = box_world(ctx.seed.wrapping_add(1), &spec, &placed, &bank, a.points_per_voxel)?;
    let mut manifest = String::from("# points pose camera features timestamp\n");
    let mut points = 0;
    for (i, f) in world.frames.iter().enumerate() {
        let stem = format!("frame{i:03}");
        let cloud = PointCloud::new(0, f.points.clone(), Vec::new())?;
        points += cloud.points.len();
        write_bytes(&dir.join(format!("{stem}.pnts")), &encode_point_cloud(&cloud)?)?;
        write_bytes(&dir.join(format!("{stem}.pose")), format_pose(&f.pose).as_bytes())?;
        write_bytes(&dir.join(format!("{stem}.cam")), format_camera(&f.camera).as_bytes())?;
        write_bytes(&dir.join(format!("{stem}.vgrd")), &encode_voxel_grid(&f.feature_map.to_voxel_grid())?)?;
        manifest.push_str(&format!(
            "{stem}.pnts {stem}.pose {stem}.cam {stem}.vgrd {}\n",
            i as f64 * a.frame_interval
        ));
    }
    let manifest_sha = write_bytes(&dir.join("manifest.txt"), manifest.as_bytes())?;
    write_bytes(&dir.join("classes.temb"), &encode_embedding_bank(&bank)?)?;
    let gt = SemanticGrid::new(spec, a.classes as usize, world.gt.clone())?;
    let gt_sha = write_bytes(&dir.join("gt.vgrd"), &encode_voxel_grid(&gt.to_voxel_grid())?)?;
    let occupied = world.gt.iter().flatten().count();
    ctx.out.record(&json!({
        "command": "synth-boxes",
        "boxes": placed.len(),
        "frames": world.frames.len(),
        "points": points,
        "occupied": occupied,
        "manifest_sha256": manifest_sha,
        "gt_sha256": gt_sha,
    }));
    let mut t = Table::new(&["box", "class", "min", "max"]).titled("synthetic boxes");
    for (i, b) in placed.iter().enumerate() {
        let v = |p: [f64; 3]| format!("{:.2},{:.2},{:.2}", p[0], p[1], p[2]);
        t.row(vec![i.to_string(), b.class.to_string(), v(b.min), v(b.max)]);
    }
    ctx.out.table(&t);
    Ok(())
}

fn from_labels(ctx: &Context, a: &SynthFromLabelsArgs) -> CliResult<()> {
    let labels = PseudoLabelGrid::from_voxel_grid(&load_voxel_grid(&a.labels)?)?;
    let set = voxel_gaussians(&labels, a.sigma, a.opacity)?;
    let file_sha = write_bytes(&a.out, &encode_gaussian_set(&set)?)?;
    ctx.out.record(&json!({
        "command": "synth-from-labels",
        "gaussians": set.len(),
        "feature_dim": set.feature_dim(),
        "scene_sha256": scene_hash(&set),
        "file_sha256": file_sha,
    }));
    let mut t = Table::new(&["quantity", "value"]).titled("Gaussians from labels");
    t.row(vec!["gaussians".into(), set.len().to_string()]);
    ctx.out.table(&t);
    Ok(())
}
