use g2v_core::io::load_gaussian_set;
use g2v_core::prepared::PreparedGaussians;
use g2v_core::build_dual_csr_prepared;
use serde_json::json;

use super::{write_bytes, Context};
use crate::args::BinArgs;
use crate::error::CliResult;
use crate::output::{sha256_hex, Table};

pub fn run(ctx: &Context, a: &BinArgs) -> CliResult<()> {
    let set = load_gaussian_set(&a.set)?;
    let spec = a.grid.spec("nuscenes")?;
    let prep = PreparedGaussians::from_set(&set)?;
    let csr = build_dual_csr_prepared(&prep, &spec, a.radius)?;
    csr.validate()?;
    let dump = csr.dump_text();
    if let Some(p) = &a.dump {
        write_bytes(p, dump.as_bytes())?;
    }
    let per_tile = (0..csr.num_tiles()).map(|t| csr.gaussians_of(t).len());
    let nonempty = per_tile.clone().filter(|&n| n > 0).count();
    let max_per_tile = per_tile.max().unwrap_or(0);
    let max_per_gaussian = (0..csr.num_gaussians()).map(|g| csr.tiles_of(g).len()).max().unwrap_or(0);
    let record = json!({
        "command": "bin",
        "gaussians": csr.num_gaussians(),
        "tiles": csr.num_tiles(),
        "pairs": csr.pair_count(),
        "nonempty_tiles": nonempty,
        "max_gaussians_per_tile": max_per_tile,
        "max_tiles_per_gaussian": max_per_gaussian,
        "csr_sha256": sha256_hex(dump.as_bytes()),
    });
    ctx.out.record(&record);
    let mut t = Table::new(&["quantity", "value"]).titled("dual CSR");
    for (k, v) in [
        ("gaussians", csr.num_gaussians()),
        ("tiles", csr.num_tiles()),
        ("pairs", csr.pair_count()),
        ("nonempty tiles", nonempty),
        ("max gaussians per tile", max_per_tile),
        ("max tiles per gaussian", max_per_gaussian),
    ] {
        t.row(vec![k.into(), v.to_string()]);
    }
    ctx.out.table(&t);
    Ok(())
}
