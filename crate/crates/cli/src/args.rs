use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Unified tensor-based active appearance models.
///
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
#[derive(Debug, Parser)]
#[command(name = "utaam", version)]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for long flags; flags
    /// given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic multi-factor dataset.
    Gen(GenArgs),
    /// Build a model file from a manifest.
    Build(BuildArgs),
    /// Complete a masked tensor.
    Complete(CompleteArgs),
    /// Train a regression cascade and store it in a model file.
    Train(TrainArgs),
    /// Fit landmarks to images.
    Fit(FitArgs),
    /// Render model instances.
    Synth(SynthArgs),
    /// Score predicted landmarks against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 60)]
    pub identities: usize,
    #[arg(long, default_value_t = 7)]
    pub poses: usize,
    #[arg(long, default_value_t = 5)]
    pub illuminations: usize,
    #[arg(long, default_value_t = 3)]
    pub expressions: usize,
    /// Landmarks per face.
    #[arg(long, default_value_t = 24)]
    pub points: usize,
    /// Image side in pixels.
    #[arg(long, default_value_t = 128)]
    pub image_size: usize,
    /// Poses span [-yaw-range, yaw-range] degrees.
    #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
    pub yaw_range: f64,
    #[arg(long, default_value_t = 0.06)]
    pub identity_sigma: f64,
    #[arg(long, default_value_t = 0.08)]
    pub expression_amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Tucker,
    Cp,
    Init,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Init {
    Variation,
    Random,
}

#[derive(Debug, Args)]
pub struct CompletionArgs {
    /// Completion solver.
    #[arg(long, value_enum, default_value_t = Solver::Tucker)]
    pub solver: Solver,
    /// Initialization of missing samples.
    #[arg(long, value_enum, default_value_t = Init::Variation)]
    pub init: Init,
    /// CP rank for `--solver cp`.
    #[arg(long, default_value_t = 5)]
    pub cp_rank: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// 4-way UTT1 grid mask; zero cells are dropped before building.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Fraction of cells to drop at random (uses --seed).
    #[arg(long)]
    pub missing: Option<f64>,
    /// Reference shape height in pixels.
    #[arg(long, default_value_t = 48.0)]
    pub reference_height: f64,
    #[arg(long, default_value_t = 32)]
    pub hog_patch: usize,
    #[arg(long, default_value_t = 8)]
    pub hog_cell: usize,
    #[arg(long, default_value_t = 9)]
    pub hog_bins: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub hog_eps: f64,
    /// Shape model ranks `Ri,Rp,Rl,Re,Rs` (default: full).
    #[arg(long)]
    pub shape_ranks: Option<String>,
    /// Texture model ranks `Ri,Rp,Rl,Re,Rt` (default: full).
    #[arg(long)]
    pub texture_ranks: Option<String>,
    /// Tucker completion ranks for the shape tensor.
    #[arg(long)]
    pub completion_shape_ranks: Option<String>,
    /// Tucker completion ranks for the texture tensor.
    #[arg(long)]
    pub completion_texture_ranks: Option<String>,
    #[command(flatten)]
    pub completion: CompletionArgs,
    /// Landmark indices of the left eye, comma separated.
    #[arg(long)]
    pub left_eye: Option<String>,
    /// Landmark indices of the right eye, comma separated.
    #[arg(long)]
    pub right_eye: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// 5-way UTT1 sample tensor.
    #[arg(long)]
    pub tensor: PathBuf,
    /// UTT1 mask with the tensor's dims or its first four dims.
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Objective trace output, one value per line (default: stdout).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Tucker ranks, comma separated (default: ceil(I/2) per sample mode).
    #[arg(long)]
    pub ranks: Option<String>,
    #[command(flatten)]
    pub completion: CompletionArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output model file (default: overwrite --model).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cascade length.
    #[arg(long, default_value_t = 5)]
    pub stages: usize,
    /// Ridge weight (default: scaled to the features of each stage).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Initializations per training image.
    #[arg(long, default_value_t = 10)]
    pub perturbations: usize,
    #[arg(long, default_value_t = 5)]
    pub projection_rounds: usize,
    /// Train on at most this many randomly chosen rows (0: all).
    #[arg(long, default_value_t = 0)]
    pub max_samples: usize,
    #[arg(long, default_value_t = 0.1)]
    pub jitter_scale: f64,
    /// Rotation jitter in degrees.
    #[arg(long, default_value_t = 10.0)]
    pub jitter_rotation: f64,
    /// Translation jitter as a fraction of face size.
    #[arg(long, default_value_t = 0.05)]
    pub jitter_translation: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Manifest of images with ground truth; enables the error report.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// PGM images to fit.
    pub images: Vec<PathBuf>,
    /// Output directory for `.pts` files.
    #[arg(long)]
    pub out: PathBuf,
    /// Error report path (default: OUT/report.txt).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Face box `cx,cy,height` for initialization (default: image center
    /// at the training face size).
    #[arg(long)]
    pub bbox: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub texture_rounds: usize,
    /// Use every k-th manifest row.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub left_eye: Option<String>,
    #[arg(long)]
    pub right_eye: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Output PGM.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the synthesized landmarks.
    #[arg(long)]
    pub pts: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub identity: usize,
    #[arg(long, default_value_t = 0)]
    pub pose: usize,
    #[arg(long, default_value_t = 0)]
    pub illumination: usize,
    #[arg(long, default_value_t = 0)]
    pub expression: usize,
    /// Pose interpolation `A B T`: rows (1-T)·A + T·B replace --pose.
    #[arg(long, num_args = 3, value_names = ["A", "B", "T"])]
    pub interpolate: Option<Vec<String>>,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    /// Face scale in pixels per model unit (default: training face size).
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub background: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Manifest with ground truth.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of predicted `.pts` files named after the images.
    #[arg(long)]
    pub pred: PathBuf,
    /// Report path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Model file whose eye sets normalize the error.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub left_eye: Option<String>,
    #[arg(long)]
    pub right_eye: Option<String>,
    /// Use every k-th manifest row.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}
