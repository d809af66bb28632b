use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::grid::GridArgs;

#[derive(Debug, Parser)]
#[command(name = "g2v", version, about = "Gaussian-to-voxel splatting, rendering, labeling and evaluation")]
pub struct Cli {
    /// worker threads (default: hardware parallelism)
    #[arg(long, global = true, env = "GSV_THREADS")]
    pub threads: Option<usize>,
    /// seed for every random choice
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// flat `key = value` file of flag defaults
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// print human tables to stdout instead of JSON lines
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the dual CSR for a Gaussian set and summarize it
    Bin(BinArgs),
    /// Splat a Gaussian set into a voxel grid
    Splat(SplatArgs),
    /// Alpha-composite a Gaussian set into a camera view
    Render(RenderArgs),
    /// Compare backward gradients against finite differences
    Gradcheck(GradcheckArgs),
    /// Time the binned kernels against the all-pairs oracle
    Bench(BenchArgs),
    /// Turn posed frames into a pseudo-label grid
    Label(LabelArgs),
    /// Label a splatted grid with text embeddings and score it
    Query(QueryArgs),
    /// Loss report or trajectory metrics
    Eval(EvalArgs),
    /// Generate synthetic inputs
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadKind {
    Identity,
    Logistic,
}

#[derive(Debug, Clone, Args)]
pub struct HeadArgs {
    /// occupancy head applied to density
    #[arg(long, value_enum, default_value_t = HeadKind::Identity)]
    pub head: HeadKind,
    /// logistic head `a · σ(b · F)`: scale a
    #[arg(long, default_value_t = 1.0)]
    pub head_a: f64,
    /// logistic head `a · σ(b · F)`: slope b
    #[arg(long, default_value_t = 1.0)]
    pub head_b: f64,
    /// occupancy threshold on the head output
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
}

#[derive(Debug, Args)]
pub struct BinArgs {
    #[arg(long)]
    pub set: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// support radius in standard deviations
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
    /// write the CSR arrays as text
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplatArgs {
    #[arg(long)]
    pub set: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
    #[command(flatten)]
    pub head: HeadArgs,
    /// splat onto the grid's ground plane (one z layer)
    #[arg(long)]
    pub bev: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub set: PathBuf,
    /// camera text file (intrinsics, extrinsic, size)
    #[arg(long)]
    pub camera: PathBuf,
    /// features as a W×H×1 grid file
    #[arg(long)]
    pub out_features: Option<PathBuf>,
    /// 16-bit PGM depth
    #[arg(long)]
    pub out_depth: Option<PathBuf>,
    /// PGM units per meter
    #[arg(long, default_value_t = 1000.0)]
    pub depth_scale: f64,
    /// PPM of the first three channels mapped from [-1, 1]
    #[arg(long)]
    pub out_rgb: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Gaussian count
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// cube grid side in voxels
    #[arg(long, default_value_t = 16)]
    pub side: usize,
    #[arg(long, default_value_t = 8)]
    pub c: usize,
    #[arg(long, default_value_t = 0.5)]
    pub voxel_size: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub abs_tol: f64,
    /// opacities small enough that every voxel takes the `F ≤ ε` branch
    #[arg(long)]
    pub epsilon_branch: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Gaussian count
    #[arg(long, alias = "count", default_value_t = 18_000)]
    pub n: usize,
    #[arg(long, default_value_t = 128)]
    pub c: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, alias = "repetitions", default_value_t = 3)]
    pub reps: usize,
    /// voxels the all-pairs forward is timed on
    #[arg(long, default_value_t = 4096)]
    pub naive_voxels: usize,
    /// Gaussians the all-pairs backward is timed on
    #[arg(long, default_value_t = 64)]
    pub naive_gaussians: usize,
    /// also write the report here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    Mean,
    Vote,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// manifest: `points.pnts pose.txt camera.txt features.vgrd [timestamp]` per line
    #[arg(long)]
    pub frames: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// visibility as a 1/0 density grid
    #[arg(long)]
    pub out_visibility: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SamplingArg::Bilinear)]
    pub sampling: SamplingArg,
    #[arg(long, value_enum, default_value_t = AggregationArg::Mean)]
    pub aggregation: AggregationArg,
    /// keep frames at most this often (needs timestamps)
    #[arg(long)]
    pub keyframe_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AveragingArg {
    Gt,
    Union,
    All,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// splatted grid with features
    #[arg(long)]
    pub grid: PathBuf,
    /// text embedding bank
    #[arg(long)]
    pub classes: PathBuf,
    /// one-hot ground-truth label grid
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[command(flatten)]
    pub head: HeadArgs,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, value_enum, default_value_t = AveragingArg::Gt)]
    pub averaging: AveragingArg,
    /// write the predicted labels as a one-hot grid
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["losses", "trajectory"])))]
pub struct EvalArgs {
    /// loss report of a splatted grid against pseudo labels
    #[arg(long)]
    pub losses: bool,
    /// L2 and collision rate of a planned trajectory
    #[arg(long)]
    pub trajectory: bool,

    /// splatted grid (losses)
    #[arg(long, requires = "labels")]
    pub grid: Option<PathBuf>,
    /// pseudo-label grid (losses)
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// visibility grid (losses)
    #[arg(long)]
    pub visibility: Option<PathBuf>,
    /// loss weights: unit or ablation
    #[arg(long, default_value = "unit")]
    pub weights: String,
    #[command(flatten)]
    pub head: HeadArgs,
    #[arg(long, default_value_t = 0.85)]
    pub silog_lambda: f64,
    /// Gaussian set to render for the image terms
    #[arg(long, requires = "camera")]
    pub set: Option<PathBuf>,
    #[arg(long)]
    pub camera: Option<PathBuf>,
    /// W×H×C target feature image
    #[arg(long, requires = "set")]
    pub target_features: Option<PathBuf>,
    /// W×H×1 target depth image, meters, 0 for missing
    #[arg(long, requires = "set")]
    pub target_depth: Option<PathBuf>,

    /// predicted waypoints, `x y` per line (trajectory)
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// ground-truth waypoints (trajectory)
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// obstacle grid, flattened over z (trajectory)
    #[arg(long)]
    pub obstacles: Option<PathBuf>,
    #[arg(long, default_value_t = 4.1)]
    pub ego_length: f64,
    #[arg(long, default_value_t = 1.7)]
    pub ego_width: f64,
    /// count waypoints outside the obstacle grid as collisions
    #[arg(long)]
    pub outside_collision: bool,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Random anisotropic Gaussians over a grid
    Scene(SynthSceneArgs),
    /// Labeled boxes seen by posed frames, with a manifest and ground truth
    Boxes(SynthBoxesArgs),
    /// One small Gaussian per occupied voxel of a label grid
    FromLabels(SynthFromLabelsArgs),
}

#[derive(Debug, Args)]
pub struct SynthSceneArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub c: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Gaussians centered just outside the grid
    #[arg(long, default_value_t = 0)]
    pub outside: usize,
    /// smallest standard deviation, in voxels
    #[arg(long, default_value_t = 0.4)]
    pub scale_min: f64,
    /// largest standard deviation, in voxels
    #[arg(long, default_value_t = 2.0)]
    pub scale_max: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthBoxesArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 6)]
    pub boxes: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: u32,
    #[arg(long, default_value_t = 2)]
    pub points_per_voxel: usize,
    /// timestamp spacing of consecutive frames, seconds
    #[arg(long, default_value_t = 0.5)]
    pub frame_interval: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthFromLabelsArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// standard deviation in voxels
    #[arg(long, default_value_t = 0.25)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub opacity: f64,
    #[arg(long)]
    pub out: PathBuf,
}
