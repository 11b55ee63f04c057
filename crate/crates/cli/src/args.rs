use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "fmeanshift", version, about = "Functional mean-shift clustering and mode testing for curves")]
pub struct Cli {
    /// Seed for every random step
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cluster curves by the mode their mean-shift ascent reaches
    Cluster(ClusterArgs),
    /// Sweep bandwidths and count non-atomic clusters
    Scan(ScanArgs),
    /// Split-sample bootstrap test of the candidate modes
    TestModes(TestArgs),
    /// Write a simulated sample with its true groups
    Simulate(SimulateArgs),
    /// Principal component scores followed by k-means
    Baseline(BaselineArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Curve table: grid in the first row, one curve per later row
    #[arg(long, conflicts_with = "signatures", required_unless_present = "signatures")]
    pub curves: Option<PathBuf>,

    /// Directory of signature files, one pen trajectory each
    #[arg(long)]
    pub signatures: Option<PathBuf>,

    /// Feature grid size for signatures
    #[arg(long, default_value_t = 101)]
    pub grid_points: usize,

    /// Local quadratic smoothing bandwidth for signature coordinates
    #[arg(long, default_value_t = 0.05)]
    pub smoothing_bandwidth: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceArg {
    L2,
    SobolevH1,
    DerivativeL2,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeArg {
    FiniteDifference,
    LocalPoly,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Kernel pair, named `<k>_<g>`
    #[arg(long, default_value = "gaussian_gaussian")]
    pub kernel: String,

    #[arg(long, value_enum, default_value_t = DistanceArg::L2)]
    pub distance: DistanceArg,

    /// Derivative order for derivative-l2
    #[arg(long, default_value_t = 1)]
    pub order: usize,

    #[arg(long, value_enum, default_value_t = DerivativeArg::FiniteDifference)]
    pub derivative: DerivativeArg,

    #[arg(long, default_value_t = 2)]
    pub derivative_degree: usize,

    #[arg(long, default_value_t = 0.1)]
    pub derivative_bandwidth: f64,

    /// Normalize densities by the pairwise kernel sum instead of reporting numerators
    #[arg(long)]
    pub normalized: bool,
}

#[derive(Args, Debug, Clone)]
#[group(multiple = false)]
pub struct BandwidthArgs {
    /// Absolute bandwidth
    #[arg(long)]
    pub bandwidth: Option<f64>,

    /// Bandwidth as a fraction of the largest pairwise distance
    #[arg(long)]
    pub bandwidth_frac: Option<f64>,

    /// Bandwidth as a quantile of the pairwise distances
    #[arg(long)]
    pub bandwidth_quantile: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct EngineArgs {
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,

    /// Stop when the step norm falls below this (default 1e-6 of the largest distance)
    #[arg(long)]
    pub tolerance: Option<f64>,

    /// Merge terminal points closer than this multiple of the bandwidth
    #[arg(long, default_value_t = 0.05)]
    pub merge_factor: f64,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub bandwidth: BandwidthArgs,
    #[command(flatten)]
    pub engine: EngineArgs,

    /// Report file (TOML); printed to stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Modal curves as a curve table
    #[arg(long)]
    pub modes_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub engine: EngineArgs,

    #[arg(long, default_value_t = 100)]
    pub values: usize,

    #[arg(long, default_value_t = 0.05)]
    pub lo: f64,

    #[arg(long, default_value_t = 0.50)]
    pub hi: f64,

    #[arg(long, default_value_t = 5)]
    pub min_plateau: usize,

    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Per-bandwidth table as CSV
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatisticArg {
    Eigen,
    Paper,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub bandwidth: BandwidthArgs,
    #[command(flatten)]
    pub engine: EngineArgs,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[arg(long, default_value_t = 1000)]
    pub boot: usize,

    #[arg(long, value_enum, default_value_t = StatisticArg::Eigen)]
    pub statistic: StatisticArg,

    /// Shuffle before splitting instead of taking the first half
    #[arg(long)]
    pub random_split: bool,

    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Per-mode intervals as CSV
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// signal_clutter, elliptical_sincos or circular_sincos
    pub kind: String,

    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long, default_value_t = 101)]
    pub grid_points: usize,

    /// Curve table with a label column holding the true group
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value_t = 2)]
    pub components: usize,

    #[arg(long, default_value_t = 2)]
    pub k: usize,

    /// Score and cluster table as CSV; printed to stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}
