use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Fractional diffusion maps: sampling, spectra, validation and kernel ridge
/// regression experiments.
///
/// Every option can also come from a flat `key = value` file given with
/// `--config`; keys are the long option names. Command-line flags take
/// precedence over the file, which takes precedence over built-in defaults.
#[derive(Debug, Parser)]
#[command(name = "fdm", version)]
pub struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Omit the timestamp line from written files.
    #[arg(long, global = true)]
    pub reproducible: bool,

    /// Run the data-parallel loops on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a sample point cloud as CSV.
    Sample(SampleArgs),
    /// Run the pipeline on a point-cloud file.
    Fdm(FdmArgs),
    /// Compare estimates with analytic truth (bandwidth sweeps, interval curves).
    Validate(ValidateArgs),
    /// Kernel ridge regression of a noisy indicator on the circle.
    Krr(KrrArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Manifold {
    Circle,
    Sphere,
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleKind {
    Uniform,
    Nonuniform,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Distance {
    /// Shortest paths through the neighbour graph.
    Graph,
    /// Great-circle distances (sphere only).
    Analytic,
    /// Ambient distances.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// RMSE of the eigenfunctions over a bandwidth grid.
    Sweep,
    /// Generator of x^2 on [0, 1] against the regional and spectral operators.
    Interval,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub manifold: Option<Manifold>,
    /// Circle sampling scheme.
    #[arg(long, value_enum)]
    pub kind: Option<SampleKind>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Icosphere subdivision level.
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Pipeline parameters shared by `fdm` and `validate`.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub beta: Option<f64>,
    /// Intrinsic dimension; inferred from the manifold tag when possible.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of nontrivial eigenpairs.
    #[arg(long = "l")]
    pub l: Option<usize>,
    #[arg(long, value_enum)]
    pub distance: Option<Distance>,
    /// Use great-circle distances on the sphere instead of graph geodesics.
    #[arg(long, conflicts_with = "distance")]
    pub analytic_geodesic: bool,
    /// Neighbour-graph threshold (default sqrt(eps)).
    #[arg(long)]
    pub graph_threshold: Option<f64>,
    /// Density-estimate bandwidth (default eps).
    #[arg(long)]
    pub kde_bandwidth: Option<f64>,
    /// `kernel`, `unit` or a positive number.
    #[arg(long)]
    pub generator_scale: Option<String>,
    #[arg(long, value_enum)]
    pub solver: Option<Solver>,
    /// Permit all-pairs shortest paths on very large spheres.
    #[arg(long)]
    pub allow_long: bool,
    /// Also write SVG charts.
    #[arg(long)]
    pub svg: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FdmArgs {
    /// Point-cloud CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Also write the Markov matrix H as a binary matrix file.
    #[arg(long)]
    pub dump_heat: bool,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    #[arg(long, value_enum)]
    pub manifold: Option<Manifold>,
    #[arg(long, value_enum)]
    pub kind: Option<SampleKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bandwidths, comma separated (default 2^(-k/2), k = 2..29).
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// RMSE threshold for counting well-estimated eigenfunctions.
    #[arg(long)]
    pub rmse_threshold: Option<f64>,
    /// Lower bound on the graph threshold during sweeps.
    #[arg(long)]
    pub threshold_floor: Option<f64>,
    /// First index of the power-law fit.
    #[arg(long)]
    pub fit_lo: Option<usize>,
    /// Last index of the power-law fit.
    #[arg(long)]
    pub fit_hi: Option<usize>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct KrrArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bandwidth grid, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "eps_count")]
    pub eps_grid: Option<Vec<f64>>,
    /// Number of log-spaced bandwidths in [1e-3, 1].
    #[arg(long)]
    pub eps_count: Option<usize>,
    /// Ridge-weight grid, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "delta_count")]
    pub delta_grid: Option<Vec<f64>>,
    /// Number of log-spaced ridge weights in [1e-20, 1e-2].
    #[arg(long)]
    pub delta_count: Option<usize>,
    /// Lower bound on the graph threshold of the polynomial kernel.
    #[arg(long)]
    pub threshold_floor: Option<f64>,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
