use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn g2v(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_g2v"))
        .current_dir(dir)
        .env_remove("GSV_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "expected one JSON line, got {text:?}");
    serde_json::from_str(&text).unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = g2v(dir, args);
    assert!(
        out.status.success(),
        "g2v {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    json(&out)
}

const GRID: [&str; 4] = ["--dims", "8,8,8", "--voxel-size", "0.5"];

fn scene(dir: &Path, name: &str) -> Value {
    ok(dir, &[&["synth", "scene", "--n", "60", "--c", "4"][..], &GRID, &["--out", name]].concat())
}

#[test]
fn help_exits_zero() {
    let d = tempfile::tempdir().unwrap();
    let out = g2v(d.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["bin", "splat", "render", "gradcheck", "bench", "label", "query", "eval", "synth"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    for sub in ["bin", "splat", "render", "gradcheck", "bench", "label", "query", "eval", "synth"] {
        assert_eq!(g2v(d.path(), &[sub, "--help"]).status.code(), Some(0), "{sub} --help");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let out = g2v(d.path(), &["splat", "--bogus"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(out.stdout.is_empty());
    assert_eq!(g2v(d.path(), &["frobnicate"]).status.code(), Some(64));
    assert_eq!(g2v(d.path(), &["--threads", "0", "gradcheck"]).status.code(), Some(64));
    assert_eq!(g2v(d.path(), &["bin", "--set", "x.gset", "--dims", "1,2"]).status.code(), Some(64));
}

#[test]
fn bad_inputs_are_validation_errors() {
    let d = tempfile::tempdir().unwrap();
    let out = g2v(d.path(), &[&["splat", "--set", "missing.gset"][..], &GRID, &["--out", "g.vgrd"]].concat());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.gset"));
    std::fs::write(d.path().join("junk.gset"), b"GSET\x02\0\0\0").unwrap();
    let out = g2v(d.path(), &[&["bin", "--set", "junk.gset"][..], &GRID].concat());
    assert_eq!(out.status.code(), Some(1));
    scene(d.path(), "s.gset");
    let out = g2v(d.path(), &["bin", "--set", "s.gset", "--dims", "8,8,8", "--voxel-size", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_gradient_check_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let args = ["gradcheck", "--n", "8", "--side", "4", "--c", "2"];
    assert!(ok(d.path(), &args)["passed"].as_bool().unwrap());
    let out = g2v(d.path(), &[&args[..], &["--rel-tol", "0", "--abs-tol", "0"]].concat());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["passed"], false);
}

#[test]
fn gradcheck_seed_seven_with_fifty_gaussians_passes() {
    let d = tempfile::tempdir().unwrap();
    let r = ok(d.path(), &["--seed", "7", "gradcheck", "--n", "50"]);
    assert_eq!(r["passed"], true);
    assert_eq!(r["params"].as_array().unwrap().len(), 4);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("g.conf"), "# small check\nn = 5\nside = 4\nc = 2\nepsilon_branch = true\n").unwrap();
    let r = ok(d.path(), &["gradcheck", "--config", "g.conf"]);
    assert_eq!((r["n"].as_u64(), r["side"].as_u64(), r["c"].as_u64()), (Some(5), Some(4), Some(2)));
    assert_eq!(r["epsilon_branch"], true);
    let r = ok(d.path(), &["gradcheck", "--config", "g.conf", "--n", "7"]);
    assert_eq!(r["n"].as_u64(), Some(7));
    std::fs::write(d.path().join("bad.conf"), "no equals sign\n").unwrap();
    assert_eq!(g2v(d.path(), &["gradcheck", "--config", "bad.conf"]).status.code(), Some(64));
    assert_eq!(g2v(d.path(), &["gradcheck", "--config", "absent.conf"]).status.code(), Some(1));
}

#[test]
fn thread_count_falls_back_to_environment() {
    let d = tempfile::tempdir().unwrap();
    let bench = ["bench", "--n", "20", "--c", "2", "--dims", "8,8,8", "--voxel-size", "0.5", "--reps", "1"];
    let out = Command::new(env!("CARGO_BIN_EXE_g2v"))
        .current_dir(d.path())
        .env("GSV_THREADS", "3")
        .args(bench)
        .output()
        .unwrap();
    assert_eq!(json(&out)["threads"], 3);
    let out = Command::new(env!("CARGO_BIN_EXE_g2v"))
        .current_dir(d.path())
        .env("GSV_THREADS", "3")
        .args([&["--threads", "2"][..], &bench].concat())
        .output()
        .unwrap();
    assert_eq!(json(&out)["threads"], 2);
}

#[test]
fn tables_go_to_stderr_unless_pretty() {
    let d = tempfile::tempdir().unwrap();
    scene(d.path(), "s.gset");
    let args = [&["bin", "--set", "s.gset"][..], &GRID].concat();
    let out = g2v(d.path(), &args);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dual CSR"));
    json(&out);
    let out = g2v(d.path(), &[&["--pretty"][..], &args].concat());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("dual CSR") && !text.contains('{'));
    assert!(out.stderr.is_empty());
}

#[test]
fn fixed_seed_gives_identical_scenes() {
    let d = tempfile::tempdir().unwrap();
    let a = scene(d.path(), "a.gset");
    let b = scene(d.path(), "b.gset");
    assert_eq!(a["scene_sha256"], b["scene_sha256"]);
    assert_eq!(
        std::fs::read(d.path().join("a.gset")).unwrap(),
        std::fs::read(d.path().join("b.gset")).unwrap()
    );
    let c = ok(d.path(), &[&["--seed", "1", "synth", "scene", "--n", "60", "--c", "4"][..], &GRID, &["--out", "c.gset"]].concat());
    assert_ne!(a["scene_sha256"], c["scene_sha256"]);
}

#[test]
fn degenerate_bench_completes() {
    let d = tempfile::tempdir().unwrap();
    let r = ok(
        d.path(),
        &["bench", "--count", "1", "--c", "1", "--dims", "4,4,4", "--voxel-size", "1", "--repetitions", "1"],
    );
    assert_eq!(r["gaussians"], 1);
    assert_eq!(r["repetitions"], 1);
}

#[test]
fn splat_onto_nuscenes_preset_writes_a_grid() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "scene", "--n", "50", "--c", "4", "--grid-preset", "nuscenes", "--out", "s.gset"]);
    let r = ok(d.path(), &["splat", "--set", "s.gset", "--grid-preset", "nuscenes", "--out", "g.vgrd"]);
    assert_eq!(r["dims"], serde_json::json!([200, 200, 16]));
    let grid = g2v_core::io::load_voxel_grid(d.path().join("g.vgrd")).unwrap();
    assert_eq!(grid.spec.dims, [200, 200, 16]);
    assert_eq!(grid.feature_dim, 4);
}

#[test]
fn query_reports_iou_against_ground_truth() {
    let d = tempfile::tempdir().unwrap();
    let grid = ["--dims", "20,16,8", "--voxel-size", "0.4"];
    ok(d.path(), &[&["synth", "boxes", "--boxes", "4"][..], &grid, &["--out-dir", "w"]].concat());
    ok(d.path(), &[&["label", "--frames", "w/manifest.txt"][..], &grid, &["--out", "l.vgrd"]].concat());
    ok(d.path(), &["synth", "from-labels", "--labels", "l.vgrd", "--out", "l.gset"]);
    ok(d.path(), &[&["splat", "--set", "l.gset"][..], &grid, &["--out", "g.vgrd"]].concat());
    let q = ok(d.path(), &["query", "--grid", "g.vgrd", "--classes", "w/classes.temb", "--gt", "w/gt.vgrd"]);
    assert_eq!(q["miou"], 1.0);
    assert_eq!(q["iou"], 1.0);
    let bare = ok(d.path(), &["query", "--grid", "g.vgrd", "--classes", "w/classes.temb"]);
    assert!(bare["miou"].is_null());
    assert_eq!(bare["occupied"], q["occupied"]);
}

#[test]
fn keyframe_filter_thins_the_manifest() {
    let d = tempfile::tempdir().unwrap();
    let grid = ["--dims", "20,16,8", "--voxel-size", "0.4"];
    // frames every 0.5 s
    ok(d.path(), &[&["synth", "boxes", "--boxes", "4"][..], &grid, &["--out-dir", "w"]].concat());
    let all = ok(d.path(), &[&["label", "--frames", "w/manifest.txt"][..], &grid, &["--out", "a.vgrd"]].concat());
    let half = ok(
        d.path(),
        &[&["label", "--frames", "w/manifest.txt", "--keyframe-hz", "1"][..], &grid, &["--out", "b.vgrd"]].concat(),
    );
    assert_eq!((all["frames"].as_u64(), all["keyframes"].as_u64()), (Some(4), Some(4)));
    assert_eq!(half["keyframes"].as_u64(), Some(2));
}

#[test]
fn trajectory_eval_counts_collisions() {
    let d = tempfile::tempdir().unwrap();
    let grid = g2v_core::VoxelGrid {
        spec: g2v_core::VoxelGridSpec::new([0.0; 3], [10, 10, 2], 1.0).unwrap(),
        feature_dim: 0,
        density: (0..200).map(|v| if v == 55 { 1.0 } else { 0.0 }).collect(),
        features: None,
        occupancy: None,
    };
    g2v_core::io::save_voxel_grid(&grid, d.path().join("o.vgrd")).unwrap();
    // the occupied cell is (5, 5), centered at (5.5, 5.5); only the last
    // waypoint's 1 m footprint reaches it
    std::fs::write(d.path().join("p.txt"), "2.5 5.5\n3.5 5.5\n4.5 5.5\n5.5 5.5\n").unwrap();
    let r = ok(
        d.path(),
        &["eval", "--trajectory", "--pred", "p.txt", "--gt", "p.txt", "--obstacles", "o.vgrd", "--ego-length", "1", "--ego-width", "1"],
    );
    assert_eq!(r["collisions"], serde_json::json!([false, false, false, true]));
    assert_eq!(r["collision_rate"], 0.25);
    assert_eq!(r["l2"], serde_json::json!([0.0, 0.0, 0.0, 0.0]));
}
