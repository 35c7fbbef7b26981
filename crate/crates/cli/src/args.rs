use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "rkhs-sn", version, about = "Self-normalized kernel tests for time series")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Quantile-table cache directory (default: $RKHS_SN_CACHE_DIR or ./.rkhs-sn-cache).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Append one CSV line per result to this file.
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,
    /// Input CSV files start with a header row.
    #[arg(long, global = true)]
    pub header: bool,
    /// Treat input columns as a curve sampled on an equispaced grid.
    #[arg(long, global = true)]
    pub functional: bool,
    /// Seed for Monte Carlo embeddings, simulations and new tables.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Goodness-of-fit test against a fully specified null.
    Gof(GofArgs),
    /// Test for a single change in distribution.
    Cpt(CptArgs),
    /// Test independence of two series.
    Indep(IndepArgs),
    /// Simulate one of the built-in data-generating processes.
    Simulate(SimulateArgs),
    /// Simulate (or load) a limit-law quantile table.
    Quantiles(QuantilesArgs),
    /// Run a Monte Carlo size or power study from a JSON spec.
    Study(StudyArgs),
}

#[derive(Debug, Args)]
pub struct Bandwidth {
    /// Kernel bandwidth parameter.
    #[arg(long, conflicts_with = "median_heuristic")]
    pub sigma: Option<f64>,
    /// Pick the bandwidth by the median heuristic (the default).
    #[arg(long)]
    pub median_heuristic: bool,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Quantile table file; defaults to the cached default table.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// gaussian:VAR, pointmass:V[,V..], or mc:normal:VAR, mc:exp[:RATE],
    /// mc:t:DF, mc:uniform:A:B.
    #[arg(long)]
    pub null: String,
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    #[command(flatten)]
    pub bandwidth: Bandwidth,
    #[arg(long, default_value_t = 0.35)]
    pub eta: f64,
    #[command(flatten)]
    pub common: Common,
    /// Monte Carlo draws for embeddings without a closed form.
    #[arg(long, default_value_t = 100_000)]
    pub mc_reps: usize,
    /// Use the fixed-b subsampling test instead (univariate data only).
    #[arg(long)]
    pub fixedb: bool,
    #[arg(long, default_value_t = 0.05, requires = "fixedb")]
    pub b: f64,
    #[arg(long, default_value_t = 30, requires = "fixedb")]
    pub n_prime: usize,
}

#[derive(Debug, Args)]
pub struct CptArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    #[command(flatten)]
    pub bandwidth: Bandwidth,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct IndepArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// Window half-width m for Y (and for X unless --lag-x is given).
    #[arg(long, default_value_t = 0)]
    pub lag: usize,
    /// Separate window half-width for X; uses the single-block statistic.
    #[arg(long)]
    pub lag_x: Option<usize>,
    #[arg(long, default_value = "gaussian")]
    pub kernel_x: String,
    #[arg(long, default_value = "gaussian")]
    pub kernel_y: String,
    #[arg(long, default_value_t = 0.2)]
    pub eta: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// ar1, gof_mixture, cp_mixture, gaussian_pair, far1, far1_mean_shift
    /// or far1_pair.
    #[arg(long)]
    pub dgp: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Grid size of functional processes.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
    /// gaussian or t2.
    #[arg(long)]
    pub innovation: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Second output file for pair processes.
    #[arg(long)]
    pub out_y: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantilesArgs {
    /// U or G.
    #[arg(long)]
    pub law: String,
    /// Grid steps per path (default depends on the law).
    #[arg(long = "L")]
    pub grid_steps: Option<usize>,
    /// Replications (default depends on the law).
    #[arg(long = "R")]
    pub reps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
