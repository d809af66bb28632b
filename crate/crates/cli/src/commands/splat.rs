use g2v_core::io::{encode_voxel_grid, load_gaussian_set};
use g2v_core::prepared::PreparedGaussians;
use g2v_core::splat::occupancy_mask;
use g2v_core::{build_dual_csr_prepared, splat_bev_forward, splat_forward_prepared};
use serde_json::json;

use super::{head_config, write_bytes, Context};
use crate::args::SplatArgs;
use crate::error::CliResult;
use crate::output::{digest_f64, Table};

pub fn run(ctx: &Context, a: &SplatArgs) -> CliResult<()> {
    let set = load_gaussian_set(&a.set)?;
    let spec = a.grid.spec("nuscenes")?;
    let head = head_config(&a.head)?;
    let out = if a.bev {
        splat_bev_forward(&set, &spec, a.radius)?
    } else {
        let prep = PreparedGaussians::from_set(&set)?;
        let csr = build_dual_csr_prepared(&prep, &spec, a.radius)?;
        splat_forward_prepared(&prep, &csr, &spec)?
    };
    let mut grid = out.grid;
    let mask = occupancy_mask(&grid, &head);
    let occupied = mask.iter().filter(|&&m| m).count();
    grid.occupancy = Some(mask);
    let file_sha = write_bytes(&a.out, &encode_voxel_grid(&grid)?)?;
    let density_sum: f64 = grid.density.iter().sum();
    let max_density = grid.density.iter().cloned().fold(0.0, f64::max);
    let features = grid.features.as_deref().unwrap_or(&[]);
    let record = json!({
        "command": "splat",
        "dims": grid.spec.dims,
        "voxels": grid.spec.num_voxels(),
        "feature_dim": grid.feature_dim,
        "occupied": occupied,
        "density_sum": density_sum,
        "max_density": max_density,
        "grid_sha256": digest_f64(&[&grid.density, features]),
        "file_sha256": file_sha,
    });
    ctx.out.record(&record);
    let mut t = Table::new(&["quantity", "value"]).titled(if a.bev { "BEV splat" } else { "splat" });
    t.row(vec!["voxels".into(), grid.spec.num_voxels().to_string()]);
    t.row(vec!["occupied".into(), occupied.to_string()]);
    t.row(vec!["density sum".into(), format!("{density_sum:.6}")]);
    t.row(vec!["max density".into(), format!("{max_density:.6}")]);
    ctx.out.table(&t);
    Ok(())
}
