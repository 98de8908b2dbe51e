use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tfmean::experiments::CheckKind;
use tfmean::sampling::DistributionSpec;
use tfmean::spaces::SpaceSpec;
use tfmean::{SolverMethod, Transform};

/// Transformed Fréchet means on Hadamard spaces: estimators, bounds and
/// seeded Monte Carlo experiments.
#[derive(Debug, Parser)]
#[command(name = "tfmean", version, propagate_version = true)]
pub struct Cli {
    /// Base seed of all randomness [integer, default 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [count, default: machine parallelism]
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// JSON experiment config; flags override its keys [path]
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the τ-Fréchet mean of a CSV sample and print it as a CSV row
    Estimate(EstimateArgs),
    /// Risk against the explicit rate bounds over a grid of n
    Rates(RateArgs),
    /// Frequency of large deviations against the tail bounds
    Tails(TailArgs),
    /// Displacement under ε-contamination at growing radii
    Breakdown(BreakdownArgs),
    /// Faster rates for laws with extra mass near the mean
    Fast(FastArgs),
    /// Rate of the Fréchet median with the bow-tie precondition
    Median(MedianArgs),
    /// Double excess risk and replace-one stability bounds
    Stability(StabilityArgs),
    /// Seeded property suite for the quadruple or midpoint inequality
    Check(CheckArgs),
    /// Evaluate a closed-form bound and print key=value lines
    Bounds {
        #[command(subcommand)]
        which: BoundsCommand,
    },
}

fn transform_arg(s: &str) -> Result<String, String> {
    s.parse::<Transform>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn space_arg(s: &str) -> Result<String, String> {
    s.parse::<SpaceSpec>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn distribution_arg(s: &str) -> Result<String, String> {
    s.parse::<DistributionSpec>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Auto,
    Weiszfeld,
    CyclicProx,
}

impl From<MethodArg> for SolverMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => SolverMethod::Auto,
            MethodArg::Weiszfeld => SolverMethod::Weiszfeld,
            MethodArg::CyclicProx => SolverMethod::CyclicProx,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    /// Solver [auto picks Weiszfeld where a tangent structure exists]
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Epoch cap [count, default 500]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Relative objective decrease per epoch to stop [dimensionless, default 1e-10]
    #[arg(long)]
    pub tol_obj: Option<f64>,
    /// Point movement per epoch to stop [distance units, default 1e-9]
    #[arg(long)]
    pub tol_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Space: euclidean:<d>, spd:<d>, tree:<edge-list path>, star:<legs>[:<length>]
    #[arg(long, value_parser = space_arg)]
    pub space: String,
    /// Transform: power:<α>, identity, huber[:k], pseudo-huber[:s], log-cosh, entropic
    #[arg(long, value_parser = transform_arg)]
    pub transform: String,
    /// Sample, one point per CSV row, no header [path]
    #[arg(long)]
    pub input: PathBuf,
    /// Also print objective, epochs and convergence to standard error
    #[arg(long)]
    pub report: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Flags shared by every experiment; each mirrors the config key of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Distribution, e.g. radial:pareto:<a>:<scale>@euclidean:<d>, star:<legs>:<law>,
    /// spd-sym:<d>:<scale>, fourpoint:<rho>:<s>
    #[arg(long, value_parser = distribution_arg)]
    pub distribution: Option<String>,
    /// Transform grammar as for `estimate`
    #[arg(long, value_parser = transform_arg)]
    pub transform: Option<String>,
    /// Space; must agree with the distribution when given
    #[arg(long, value_parser = space_arg)]
    pub space: Option<String>,
    /// Sample sizes, strictly increasing [comma-separated counts]
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Replications per sample size [count]
    #[arg(long)]
    pub replications: Option<usize>,
    /// Per-replication CSV; `.agg.csv` and `.summary.json` are written next to it [path]
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Draws behind plug-in moments [count, default 1e6]
    #[arg(long)]
    pub plugin_draws: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Outer Monte Carlo size for the resampled moment term [count, default 1000]
    #[arg(long)]
    pub outer_reps: Option<usize>,
    /// Hölder exponent p > 1 of the general rate bound [dimensionless, default 2]
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Tail radius r [distance units]
    #[arg(long)]
    pub r: Option<f64>,
    /// λ ∈ (0, 1] [dimensionless, default 0.9]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// η ∈ [0, 1] [dimensionless, default 0.75; 2/3 for the median]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Radius R with τ(R) ≥ λ·D·R [distance units, default 2r]
    #[arg(long)]
    pub big_r: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BreakdownArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Contaminated fraction ε ∈ [0, 1/2) [probability, default 0.4]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Contaminant distances from the mean [comma-separated distance units]
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct FastArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Concentration exponent β ∈ (α, 2] [dimensionless]
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MedianArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Bow-tie widening w ∈ [0, 1] [dimensionless, default 0.1]
    #[arg(long)]
    pub widening: Option<f64>,
    /// Draws per bow-tie mass estimate [count, default 2000]
    #[arg(long)]
    pub bowtie_draws: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Test-sample size for the population term [count, default 1e5]
    #[arg(long)]
    pub n_test: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CheckArg {
    Quadruple,
    Midpoint,
}

impl From<CheckArg> for CheckKind {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Quadruple => CheckKind::Quadruple,
            CheckArg::Midpoint => CheckKind::Midpoint,
        }
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Inequality under test
    #[arg(value_enum)]
    pub check: CheckArg,
    /// Space grammar as for `estimate`
    #[arg(long, value_parser = space_arg)]
    pub space: Option<String>,
    /// Transform grammar as for `estimate` (quadruple only)
    #[arg(long, value_parser = transform_arg)]
    pub transform: Option<String>,
    /// Random trials [count, default 1e5]
    #[arg(long = "n", alias = "trials")]
    pub trials: Option<usize>,
    /// Summary CSV path, as for experiments [path]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BoundsCommand {
    /// (91/n)(7σ_{1/2}σ_1 + 2σ_{3/2}/n) for τ(x) = x^{3/2}
    ThreeHalfs {
        /// E d(Y,m)^{1/2} [distance^{1/2}]
        #[arg(long)]
        sigma_half: f64,
        /// E d(Y,m) [distance units]
        #[arg(long)]
        sigma_one: f64,
        /// E d(Y,m)^{3/2} [distance^{3/2}]
        #[arg(long)]
        sigma_three_halfs: f64,
        /// Sample size [count]
        #[arg(long)]
        n: usize,
    },
    /// Constants and risk bound for τ(x) = x^α
    Power {
        /// Exponent α ∈ (1, 2] [dimensionless]
        #[arg(long)]
        alpha: f64,
        /// Moment E d(Y,m)^a as a=value; repeat for each exponent [distance^a]
        #[arg(long = "moment", value_parser = moment_arg)]
        moments: Vec<(f64, f64)>,
        /// Sample size [count]
        #[arg(long)]
        n: usize,
    },
    /// Deviation radius and probability for bounded-slope transforms
    Tail {
        /// λ ∈ (0, 1] [dimensionless]
        #[arg(long, default_value_t = 0.9)]
        lambda: f64,
        /// η ∈ [0, 1] [dimensionless]
        #[arg(long, default_value_t = 0.75)]
        eta: f64,
        /// Mass of the ball of radius r about m [probability]
        #[arg(long)]
        rho: f64,
        /// Ball radius [distance units]
        #[arg(long)]
        r: f64,
        /// Sample size [count]
        #[arg(long)]
        n: usize,
        /// Check τ(R) ≥ λ·D·R for this transform
        #[arg(long, value_parser = transform_arg, requires = "big_r")]
        transform: Option<String>,
        /// R of the attested condition, at most 2r [distance units]
        #[arg(long)]
        big_r: Option<f64>,
    },
    /// Deviation radius and probability for the Fréchet median
    MedianTail {
        /// η ∈ [0, 1] [dimensionless]
        #[arg(long, default_value_t = 2.0 / 3.0)]
        eta: f64,
        /// Mass of the ball of radius r about m [probability]
        #[arg(long)]
        rho: f64,
        /// Ball radius [distance units]
        #[arg(long)]
        r: f64,
        /// Sample size [count]
        #[arg(long)]
        n: usize,
    },
    /// Squared-distance bound from m to a convex set holding mass ρ
    Location {
        /// Mass of the convex set [probability]
        #[arg(long)]
        rho: f64,
        /// Diameter of the set [distance units]
        #[arg(long)]
        delta: f64,
        /// λ ∈ (0, 1] [dimensionless]
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// R of the attested condition [distance units, default δ]
        #[arg(long)]
        big_r: Option<f64>,
    },
}

fn moment_arg(s: &str) -> Result<(f64, f64), String> {
    let (a, v) = s.split_once('=').ok_or_else(|| format!("expected a=value, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad exponent in `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("bad value in `{s}`"))?;
    Ok((a, v))
}
