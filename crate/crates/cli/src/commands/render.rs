use g2v_core::io::{encode_pgm16, encode_ppm, encode_voxel_grid, load_camera, load_gaussian_set};
use g2v_core::labeler::FeatureMap;
use g2v_core::render;
use serde_json::json;

use super::{write_bytes, Context};
use crate::args::RenderArgs;
use crate::error::CliResult;
use crate::output::{digest_f64, Table};

pub fn run(ctx: &Context, a: &RenderArgs) -> CliResult<()> {
    let set = load_gaussian_set(&a.set)?;
    let cam = load_camera(&a.camera)?;
    let img = render(&set, &cam)?;
    let (w, h, c) = (img.width, img.height, img.feature_dim);
    if let Some(p) = &a.out_features {
        let map = FeatureMap::new(w, h, c, img.features.clone())?;
        write_bytes(p, &encode_voxel_grid(&map.to_voxel_grid())?)?;
    }
    if let Some(p) = &a.out_depth {
        write_bytes(p, &encode_pgm16(w, h, &img.depth, a.depth_scale))?;
    }
    if let Some(p) = &a.out_rgb {
        let rgb: Vec<[f64; 3]> = (0..w * h)
            .map(|px| {
                let f = &img.features[px * c..(px + 1) * c];
                std::array::from_fn(|k| f.get(k).map_or(0.0, |v| 0.5 * (v + 1.0)))
            })
            .collect();
        write_bytes(p, &encode_ppm(w, h, &rgb))?;
    }
    let covered = img.alpha_sum.iter().filter(|&&a| a > 0.0).count();
    let alpha_mean = img.alpha_sum.iter().sum::<f64>() / (w * h) as f64;
    let record = json!({
        "command": "render",
        "width": w,
        "height": h,
        "feature_dim": c,
        "covered_pixels": covered,
        "alpha_mean": alpha_mean,
        "image_sha256": digest_f64(&[&img.features, &img.depth, &img.alpha_sum]),
    });
    ctx.out.record(&record);
    let mut t = Table::new(&["quantity", "value"]).titled("render");
    t.row(vec!["size".into(), format!("{w}x{h}")]);
    t.row(vec!["covered pixels".into(), covered.to_string()]);
    t.row(vec!["mean alpha".into(), format!("{alpha_mean:.6}")]);
    ctx.out.table(&t);
    Ok(())
}
