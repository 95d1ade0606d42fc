use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "mspline",
    version,
    about = "Penalized M-type smoothing splines for functional data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a location curve to long-format `subject,t,y` data.
    Fit(FitArgs),
    /// Fit one smoothed-check quantile curve per τ.
    Quantiles(QuantileArgs),
    /// Monte Carlo MSE of an estimator on one simulation cell.
    Simulate(SimulateArgs),
    /// MSE decay in n and its fitted log-log slope.
    Rates(RateArgs),
    /// Reproducing-kernel curves x ↦ R(x, y) for r = 1.
    Kernel(KernelArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossName {
    Squared,
    Huber,
    Lq,
    Quantile,
    Expectile,
    Logcosh,
}

#[derive(Debug, Clone, Args)]
pub struct LossArgs {
    #[arg(long, value_enum, default_value = "huber")]
    pub loss: LossName,
    /// Huber threshold.
    #[arg(long, default_value_t = mspline::loss::DEFAULT_HUBER_K)]
    pub k: f64,
    /// Lq exponent in (1, 2].
    #[arg(long, default_value_t = 1.5)]
    pub q: f64,
    /// Quantile level for `--loss quantile`.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Expectile level.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Smoothing band of the quantile loss (default: a fraction of the response IQR).
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SmoothingArgs {
    /// Penalty order; the spline has order 2r.
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    /// Fixed smoothing parameter (disables GCV).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// GCV grid as `log10_min,log10_max,count`.
    #[arg(long, value_delimiter = ',', num_args = 3, allow_hyphen_values = true)]
    pub gcv_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Long-format CSV with header `subject,t,y`.
    pub input: PathBuf,
    /// Map [t_min, t_max] affinely onto [0, 1] before fitting.
    #[arg(long)]
    pub rescale: bool,
    /// Number of equispaced output points.
    #[arg(long, default_value_t = 101)]
    pub grid_size: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    /// Quantile levels, strictly increasing in (0, 1).
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
    pub tau: Vec<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeanName {
    Sinusoidal,
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawName {
    Gaussian,
    T3,
    SkewT3,
    MixGauss,
    Slash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignName {
    Common,
    Independent,
}

#[derive(Debug, Clone, Args)]
pub struct SimCommon {
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    #[arg(long, value_enum, default_value = "sinusoidal")]
    pub mean: MeanName,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long = "error-law", value_enum, default_value = "gaussian")]
    pub error_law: LawName,
    #[arg(long, value_enum, default_value = "common")]
    pub design: DesignName,
    #[arg(long, default_value_t = mspline::simulate::DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: SimCommon,
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Score MSE on this many equispaced points instead of the design grid.
    #[arg(long)]
    pub grid_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RatePreset {
    /// m = round(4√n) on the common grid.
    Dense,
    /// m = 5 on the common grid.
    Sparse,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub common: SimCommon,
    #[arg(long, value_enum, default_value = "dense")]
    pub preset: RatePreset,
    /// Subject counts, strictly increasing.
    #[arg(
        long = "n-seq",
        value_delimiter = ',',
        default_value = "50,100,200,400"
    )]
    pub n_seq: Vec<usize>,
    /// Points scored per replicate.
    #[arg(long, default_value_t = 500)]
    pub grid_size: usize,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Smoothing parameters.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.6,0.9")]
    pub lambda: Vec<f64>,
    /// Poles y of the kernel sections.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.8")]
    pub y: Vec<f64>,
    #[arg(long, default_value_t = mspline::rkhs::DEFAULT_PLOT_TERMS)]
    pub terms: usize,
    #[arg(long, default_value_t = 1001)]
    pub grid_size: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}
