use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use toepnmf::conv::ConvMode;
use toepnmf::hrir::DEFAULT_ONSET_THRESHOLD;
use toepnmf::sparse::{DEFAULT_LAMBDA, DEFAULT_PRUNE_THRESHOLD};

#[derive(Debug, Parser)]
#[command(name = "toepnmf", version, about = "Toeplitz semi-NMF factorisation of HRIR sets")]
pub struct Cli {
    /// Worker threads for per-direction stages (default: all cores).
    #[arg(long, global = true, env = "TOEPNMF_THREADS")]
    pub threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert an HRIR set to min-phase, remove onset delay and normalise.
    Preprocess(PreprocessArgs),
    /// Train the resonance and reflection filters.
    Factorize(FactorizeArgs),
    /// Re-solve the reflection filters with an L1 penalty and prune them.
    Sparsify(SparsifyArgs),
    /// Write the HRIRs a model reconstructs.
    Reconstruct(ReconstructArgs),
    /// Filter a signal through one or more directions of a model.
    Render(RenderArgs),
    /// Per-direction RMSE, spectral distortion and NNZE.
    Metrics(MetricsArgs),
    /// Search the window bandwidth per direction.
    TuneSigma(TuneSigmaArgs),
    /// Time the convolution modes.
    Bench(BenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Preprocess(_) => "preprocess",
            Command::Factorize(_) => "factorize",
            Command::Sparsify(_) => "sparsify",
            Command::Reconstruct(_) => "reconstruct",
            Command::Render(_) => "render",
            Command::Metrics(_) => "metrics",
            Command::TuneSigma(_) => "tune-sigma",
            Command::Bench(_) => "bench",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PreprocessArgs {
    /// Input bundle directory, or an HRIR matrix CSV (one direction per row).
    pub input: PathBuf,
    /// Directions CSV (`az_deg,el_deg` per row); required for CSV input.
    #[arg(long)]
    pub directions: Option<PathBuf>,
    /// Sample rate in Hz; required for CSV input.
    #[arg(long)]
    pub sample_rate: Option<u32>,
    /// Output bundle directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_minphase: bool,
    #[arg(long)]
    pub no_delay_removal: bool,
    #[arg(long)]
    pub no_normalize: bool,
    /// Onset is the first sample reaching this fraction of the peak magnitude.
    #[arg(long, default_value_t = DEFAULT_ONSET_THRESHOLD)]
    pub onset_threshold: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FactorizeArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Output model file (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Reflection filter length.
    #[arg(short = 'k', long = "filter-len", default_value_t = 25)]
    pub filter_len: usize,
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop early once the RMSE stops improving.
    #[arg(long)]
    pub early_stop: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Identity,
    Convolution,
    Window,
}

#[derive(Debug, Args, Serialize)]
pub struct SparsifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = TransformKind::Identity)]
    pub transform: TransformKind,
    /// Transform bandwidth; required for `convolution` and `window`.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_PRUNE_THRESHOLD)]
    pub prune: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Output bundle directory, or a `.csv` file (one direction per row).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    SparseDirect,
    DenseDirect,
    FftOverlapSave,
}

impl From<ModeArg> for ConvMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::SparseDirect => ConvMode::SparseDirect,
            ModeArg::DenseDirect => ConvMode::DenseDirect,
            ModeArg::FftOverlapSave => ConvMode::FftOverlapSave,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Source signal: mono WAV, or raw little-endian f32.
    #[arg(long)]
    pub signal: PathBuf,
    /// Sample rate of a raw signal file.
    #[arg(long)]
    pub sample_rate: Option<u32>,
    /// Direction indices to render.
    #[arg(long = "direction", required = true, num_args = 1.., value_delimiter = ',')]
    pub directions: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::SparseDirect)]
    pub mode: ModeArg,
    /// Output file (`.wav` or raw); must contain `{j}` when rendering several directions.
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    /// Per-direction report CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PRUNE_THRESHOLD)]
    pub prune: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneSigmaArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Directions to tune (default: all).
    #[arg(long = "direction", num_args = 1.., value_delimiter = ',')]
    pub directions: Vec<usize>,
    /// Bandwidth grid (default: 15, 17, ..., 63, 100, 160, 250).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = DEFAULT_PRUNE_THRESHOLD)]
    pub prune: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 44100)]
    pub signal_len: usize,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [1, 2, 4, 8, 16, 32, 64, 128, 256])]
    pub nnze: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
