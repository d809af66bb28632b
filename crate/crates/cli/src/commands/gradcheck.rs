use g2v_core::gradcheck::{check_gradients, GradCheckConfig, GradCheckReport};
use g2v_core::prepared::PreparedGaussians;
use g2v_core::synth::{random_scene, random_upstream, SceneConfig};
use g2v_core::{build_dual_csr_prepared, VoxelGridSpec};
use serde_json::json;

use super::Context;
use crate::args::GradcheckArgs;
use crate::error::{CliError, CliResult};
use crate::output::{fmt_sci, Table};

/// Seeded scene and upstream gradient, checked against central differences.
pub fn gradcheck(seed: u64, a: &GradcheckArgs) -> CliResult<GradCheckReport> {
    let spec = VoxelGridSpec::new([0.0; 3], [a.side; 3], a.voxel_size)?;
    let mut scene = SceneConfig::new(a.n, a.c);
    scene.scale_voxels = (0.5, 2.0);
    scene.outside = a.n / 10;
    if a.epsilon_branch {
        scene.opacity = (1e-9, 5e-8);
    }
    let set = random_scene(seed, &spec, &scene)?;
    let upstream = random_upstream(seed.wrapping_add(1), spec.num_voxels() * a.c);
    let prep = PreparedGaussians::from_set(&set)?;
    let csr = build_dual_csr_prepared(&prep, &spec, 3.0)?;
    let cfg = GradCheckConfig {
        step: a.step,
        rel_tol: a.rel_tol,
        abs_tol: a.abs_tol,
        opacity_relative_step: a.epsilon_branch,
    };
    let (report, _) = check_gradients(&prep, &spec, &csr, &upstream, &cfg)?;
    Ok(report)
}

pub fn run(ctx: &Context, a: &GradcheckArgs) -> CliResult<()> {
    let report = gradcheck(ctx.seed, a)?;
    let params: Vec<_> = report
        .params
        .iter()
        .map(|p| {
            json!({
                "param": p.name,
                "checked": p.checked,
                "skipped": p.skipped,
                "failures": p.failures,
                "max_rel_err": p.max_rel_err,
                "max_abs_err": p.max_abs_err,
                "worst": p.worst.map(|(g, c, an, nu)| json!({"gaussian": g, "component": c, "analytic": an, "numeric": nu})),
            })
        })
        .collect();
    ctx.out.record(&json!({
        "command": "gradcheck",
        "seed": ctx.seed,
        "n": a.n,
        "side": a.side,
        "c": a.c,
        "epsilon_branch": a.epsilon_branch,
        "passed": report.passed(),
        "params": params,
    }));
    let mut t = Table::new(&["param", "checked", "skipped", "failures", "max rel", "max abs"])
        .titled(format!("gradient check, seed {}", ctx.seed));
    for p in &report.params {
        t.row(vec![
            p.name.into(),
            p.checked.to_string(),
            p.skipped.to_string(),
            p.failures.to_string(),
            fmt_sci(p.max_rel_err),
            fmt_sci(p.max_abs_err),
        ]);
    }
    ctx.out.table(&t);
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.params.iter().filter(|p| p.failures > 0).map(|p| p.name).collect();
        Err(CliError::CheckFailed(format!("gradient mismatch in {}", failed.join(", "))))
    }
}
