//! Binned kernels against the all-pairs oracle on one seeded scene.
//!
//! The oracle costs `O(N_g · N_v)` per pass, so it is timed on an evenly
//! strided sample of voxels (forward) and Gaussians (backward) and scaled up
//! by the sampling ratio. Every oracle row is first compared with the binned
//! result; a disagreement aborts before anything is timed.

use std::time::Instant;

use g2v_core::grad::GradientBuffers;
use g2v_core::naive;
use g2v_core::prepared::PreparedGaussians;
use g2v_core::synth::{random_scene, random_upstream, SceneConfig};
use g2v_core::{build_dual_csr_prepared, splat_backward_prepared, splat_forward_prepared, GaussianSet, SplatOutput, VoxelGridSpec};
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::Context;
use crate::args::BenchArgs;
use crate::error::{CliError, CliResult};
use crate::output::Table;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub gaussian_count: usize,
    pub feature_dim: usize,
    pub spec: VoxelGridSpec,
    pub repetitions: usize,
    pub seed: u64,
    pub naive_voxels: usize,
    pub naive_gaussians: usize,
    pub radius_sigmas: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Equivalence {
    pub voxels_compared: usize,
    pub gaussians_compared: usize,
    pub max_density_rel: f64,
    pub max_feature_abs: f64,
    pub max_gradient_rel: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemoryEstimate {
    pub prepared_bytes: usize,
    pub csr_bytes: usize,
    pub grid_bytes: usize,
    pub upstream_bytes: usize,
    pub gradient_bytes: usize,
    pub binned_peak_bytes: usize,
    pub naive_peak_bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub command: &'static str,
    pub scene_sha256: String,
    pub gaussians: usize,
    pub feature_dim: usize,
    pub dims: [usize; 3],
    pub voxels: usize,
    pub threads: usize,
    pub repetitions: usize,
    pub pairs: usize,
    pub bin_ms: f64,
    pub forward_ms: f64,
    /// binning plus forward
    pub forward_total_ms: f64,
    pub backward_ms: f64,
    pub naive_forward_ms: f64,
    pub naive_backward_ms: f64,
    pub naive_voxel_sample: usize,
    pub naive_gaussian_sample: usize,
    pub forward_speedup: f64,
    pub backward_speedup: f64,
    pub equivalence: Equivalence,
    pub memory: MemoryEstimate,
}

/// SHA-256 over every parameter of every Gaussian as f64 little-endian.
pub fn scene_hash(set: &GaussianSet) -> String {
    let mut h = Sha256::new();
    h.update((set.len() as u64).to_le_bytes());
    h.update((set.feature_dim() as u64).to_le_bytes());
    for g in set.iter() {
        for v in g.mean.iter().chain(&g.quat).chain(&g.scale).chain([&g.opacity]).chain(&g.feature) {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn bench_scene(cfg: &BenchConfig) -> CliResult<GaussianSet> {
    Ok(random_scene(cfg.seed, &cfg.spec, &SceneConfig::new(cfg.gaussian_count, cfg.feature_dim))?)
}

/// `k` indices spread evenly over `0..n`.
fn strided(n: usize, k: usize) -> Vec<usize> {
    let k = k.clamp(1, n.max(1)).min(n);
    (0..k).map(|i| (2 * i + 1) * n / (2 * k)).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn check_forward(fw: &SplatOutput, sample: &[usize], rows: &[(f64, f64, Vec<f64>)]) -> CliResult<(f64, f64)> {
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    for (&v, (f, _, g)) in sample.iter().zip(rows) {
        let a = fw.density()[v];
        let rel = if *f == 0.0 { a.abs() } else { (a - f).abs() / f.abs() };
        max_rel = max_rel.max(rel);
        for (x, y) in fw.feature_row(v).iter().zip(g) {
            max_abs = max_abs.max((x - y).abs());
        }
        if rel > 1e-12 || fw.feature_row(v).iter().zip(g).any(|(x, y)| (x - y).abs() > 1e-12 * y.abs().max(1.0)) {
            return Err(CliError::CheckFailed(format!(
                "forward disagrees with the oracle at voxel {v}: density {a} vs {f}"
            )));
        }
    }
    Ok((max_rel, max_abs))
}

fn check_backward(binned: &GradientBuffers, sample: &[usize], oracle: &GradientBuffers) -> CliResult<f64> {
    let c = binned.feature_dim;
    let mut rows = GradientBuffers::zeros(sample.len(), c);
    for (i, &g) in sample.iter().enumerate() {
        rows.d_mean[i] = binned.d_mean[g];
        rows.d_cov[i] = binned.d_cov[g];
        rows.d_opacity[i] = binned.d_opacity[g];
        rows.d_feature[i * c..(i + 1) * c].copy_from_slice(binned.feature_grad(g));
    }
    let rel = rows.max_relative_diff(oracle);
    if !(rel <= 1e-10) {
        return Err(CliError::CheckFailed(format!(
            "backward disagrees with the oracle: normwise relative difference {rel:e}"
        )));
    }
    Ok(rel)
}

pub fn run_bench(cfg: &BenchConfig) -> CliResult<BenchReport> {
    if cfg.gaussian_count == 0 || cfg.feature_dim == 0 || cfg.repetitions == 0 {
        return Err(CliError::Validation("counts and repetitions must be positive".into()));
    }
    let spec = &cfg.spec;
    let nv = spec.num_voxels();
    let set = bench_scene(cfg)?;
    let scene_sha256 = scene_hash(&set);
    let prep = PreparedGaussians::from_set(&set)?;
    let upstream = random_upstream(cfg.seed.wrapping_add(1), nv * cfg.feature_dim);
    let r = cfg.radius_sigmas;

    let csr = build_dual_csr_prepared(&prep, spec, r)?;
    let fw = splat_forward_prepared(&prep, &csr, spec)?;
    let bw = splat_backward_prepared(&prep, &csr, spec, &fw, &upstream)?;

    let voxel_sample = strided(nv, cfg.naive_voxels);
    let gaussian_sample = strided(prep.len(), cfg.naive_gaussians);
    let oracle_rows = naive::splat_forward_voxels(&prep, spec, r, &voxel_sample);
    let (max_density_rel, max_feature_abs) = check_forward(&fw, &voxel_sample, &oracle_rows)?;
    let oracle_grad = naive::splat_backward_gaussians(&prep, spec, r, &fw, &upstream, &gaussian_sample)?;
    let max_gradient_rel = check_backward(&bw, &gaussian_sample, &oracle_grad)?;
    let pairs = csr.pair_count();
    drop(bw);
    drop(csr);

    let (mut bin, mut fwd, mut bwd, mut nfw, mut nbw) = (vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..cfg.repetitions {
        let t = Instant::now();
        let csr = build_dual_csr_prepared(&prep, spec, r)?;
        bin.push(ms(t));
        let t = Instant::now();
        let out = splat_forward_prepared(&prep, &csr, spec)?;
        fwd.push(ms(t));
        drop(out);
        let t = Instant::now();
        let g = splat_backward_prepared(&prep, &csr, spec, &fw, &upstream)?;
        bwd.push(ms(t));
        drop(g);
        let t = Instant::now();
        std::hint::black_box(naive::splat_forward_voxels(&prep, spec, r, &voxel_sample));
        nfw.push(ms(t) * nv as f64 / voxel_sample.len() as f64);
        let t = Instant::now();
        std::hint::black_box(naive::splat_backward_gaussians(&prep, spec, r, &fw, &upstream, &gaussian_sample)?);
        nbw.push(ms(t) * prep.len() as f64 / gaussian_sample.len() as f64);
    }
    let (bin_ms, forward_ms, backward_ms) = (median(bin), median(fwd), median(bwd));
    let (naive_forward_ms, naive_backward_ms) = (median(nfw), median(nbw));
    let forward_total_ms = bin_ms + forward_ms;

    let c = cfg.feature_dim;
    let n = prep.len();
    let f64s = std::mem::size_of::<f64>();
    let prepared_bytes = n * (3 + 9 + 9 + 1 + c) * f64s;
    let csr_bytes = (n + 1 + spec.num_tiles() + 1) * std::mem::size_of::<usize>() + 2 * pairs * 4;
    let grid_bytes = nv * (2 + c) * f64s;
    let upstream_bytes = nv * c * f64s;
    let gradient_bytes = n * (3 + 9 + 1 + c) * f64s;
    let memory = MemoryEstimate {
        prepared_bytes,
        csr_bytes,
        grid_bytes,
        upstream_bytes,
        gradient_bytes,
        binned_peak_bytes: prepared_bytes + csr_bytes + grid_bytes + upstream_bytes + gradient_bytes,
        naive_peak_bytes: prepared_bytes + grid_bytes + upstream_bytes + gradient_bytes,
    };
    Ok(BenchReport {
        command: "bench",
        scene_sha256,
        gaussians: n,
        feature_dim: c,
        dims: spec.dims,
        voxels: nv,
        threads: rayon::current_num_threads(),
        repetitions: cfg.repetitions,
        pairs,
        bin_ms,
        forward_ms,
        forward_total_ms,
        backward_ms,
        naive_forward_ms,
        naive_backward_ms,
        naive_voxel_sample: voxel_sample.len(),
        naive_gaussian_sample: gaussian_sample.len(),
        forward_speedup: naive_forward_ms / forward_total_ms,
        backward_speedup: naive_backward_ms / backward_ms,
        equivalence: Equivalence {
            voxels_compared: voxel_sample.len(),
            gaussians_compared: gaussian_sample.len(),
            max_density_rel,
            max_feature_abs,
            max_gradient_rel,
        },
        memory,
    })
}

pub fn run(ctx: &Context, a: &BenchArgs) -> CliResult<()> {
    let cfg = BenchConfig {
        gaussian_count: a.n,
        feature_dim: a.c,
        spec: a.grid.spec("nuscenes")?,
        repetitions: a.reps,
        seed: ctx.seed,
        naive_voxels: a.naive_voxels,
        naive_gaussians: a.naive_gaussians,
        radius_sigmas: 3.0,
    };
    let report = run_bench(&cfg)?;
    ctx.out.record(&report);
    if let Some(p) = &a.out {
        let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        super::write_bytes(p, text.as_bytes())?;
    }
    let mut t = Table::new(&["path", "forward ms", "backward ms"]).titled(format!(
        "{} Gaussians, C={}, {} voxels, {} threads, median of {}",
        report.gaussians, report.feature_dim, report.voxels, report.threads, report.repetitions
    ));
    t.row(vec![
        "dual CSR".into(),
        format!("{:.1} (bin {:.1})", report.forward_total_ms, report.bin_ms),
        format!("{:.1}", report.backward_ms),
    ]);
    t.row(vec![
        "all-pairs (extrapolated)".into(),
        format!("{:.1}", report.naive_forward_ms),
        format!("{:.1}", report.naive_backward_ms),
    ]);
    t.row(vec![
        "speedup".into(),
        format!("{:.2}x", report.forward_speedup),
        format!("{:.2}x", report.backward_speedup),
    ]);
    ctx.out.table(&t);
    Ok(())
}
