use g2v_core::io::{encode_voxel_grid, load_embedding_bank, load_voxel_grid};
use g2v_core::query::{iou_miou, semantic_grid_from_voxels, MiouAveraging, QueryConfig};
use g2v_core::SemanticGrid;
use serde_json::json;

use super::{head_config, write_bytes, Context};
use crate::args::{AveragingArg, QueryArgs};
use crate::error::CliResult;
use crate::output::Table;

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.4}"))
}

pub fn run(ctx: &Context, a: &QueryArgs) -> CliResult<()> {
    let grid = load_voxel_grid(&a.grid)?;
    let bank = load_embedding_bank(&a.classes)?;
    let cfg = QueryConfig {
        head: head_config(&a.head)?,
        temperature: a.temperature,
        ..QueryConfig::default()
    };
    let pred = semantic_grid_from_voxels(&grid, &bank, &cfg)?;
    let mut file_sha = None;
    if let Some(p) = &a.out {
        file_sha = Some(write_bytes(p, &encode_voxel_grid(&pred.to_voxel_grid())?)?);
    }
    let mut counts = vec![0usize; bank.num_classes()];
    for k in pred.labels.iter().flatten() {
        counts[*k as usize] += 1;
    }
    let labels_u: Vec<i64> = pred.labels.iter().map(|l| l.map_or(-1, |k| k as i64)).collect();
    let labels_sha = crate::output::sha256_hex(&labels_u.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>());

    let Some(gt_path) = &a.gt else {
        ctx.out.record(&json!({
            "command": "query",
            "occupied": counts.iter().sum::<usize>(),
            "classes": bank.names(),
            "class_counts": counts,
            "labels_sha256": labels_sha,
            "file_sha256": file_sha,
        }));
        let mut t = Table::new(&["class", "voxels"]).titled("predicted labels");
        for (name, n) in bank.names().iter().zip(&counts) {
            t.row(vec![name.clone(), n.to_string()]);
        }
        ctx.out.table(&t);
        return Ok(());
    };
    let gt = SemanticGrid::from_voxel_grid(&load_voxel_grid(gt_path)?)?;
    let averaging = match a.averaging {
        AveragingArg::Gt => MiouAveraging::GroundTruth,
        AveragingArg::Union => MiouAveraging::Union,
        AveragingArg::All => MiouAveraging::All,
    };
    let rep = iou_miou(&pred, &gt, None, averaging)?;
    let per_class: Vec<_> = (0..rep.per_class.len())
        .map(|k| {
            let c = rep.per_class[k];
            json!({
                "class": bank.names().get(k).cloned().unwrap_or_else(|| format!("class{k}")),
                "iou": rep.per_class_iou[k],
                "tp": c.tp,
                "fp": c.fp,
                "fn": c.fn_,
            })
        })
        .collect();
    ctx.out.record(&json!({
        "command": "query",
        "occupied": counts.iter().sum::<usize>(),
        "iou": rep.iou,
        "miou": rep.miou,
        "averaged_classes": rep.averaged_classes,
        "binary": {"tp": rep.binary.tp, "fp": rep.binary.fp, "fn": rep.binary.fn_},
        "per_class": per_class,
        "labels_sha256": labels_sha,
        "file_sha256": file_sha,
    }));
    let mut t = Table::new(&["class", "iou", "tp", "fp", "fn"]).titled("semantic occupancy");
    for k in 0..rep.per_class.len() {
        let c = rep.per_class[k];
        let name = bank.names().get(k).cloned().unwrap_or_else(|| format!("class{k}"));
        t.row(vec![name, opt(rep.per_class_iou[k]), c.tp.to_string(), c.fp.to_string(), c.fn_.to_string()]);
    }
    t.row(vec!["occupancy IoU".into(), opt(Some(rep.iou))]);
    t.row(vec!["mIoU".into(), opt(rep.miou)]);
    ctx.out.table(&t);
    Ok(())
}
