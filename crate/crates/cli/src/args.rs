use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "rwr",
    version,
    about = "Regression-with-residuals estimation of time-varying treatment and mediation effects"
)]
pub struct Cli {
    /// Worker threads for simulation and bootstrap (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo grid and report bias, SD and RMSE per estimator.
    Simulate(SimulateArgs),
    /// Write a synthetic dataset.
    GenData(GenDataArgs),
    /// Estimate two-period treatment effects from a CSV file.
    EstimateTv(EstimateTvArgs),
    /// Estimate total and controlled direct effects from a CSV file.
    EstimateMed(EstimateMedArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PValue {
    Normal,
    Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TvMethod {
    Conventional,
    Iptw,
    G,
    Rwr,
    RwrInteract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MedMethod {
    Rwr,
    RwrInteract,
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    Tv,
    Med,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FirstStageArg {
    Linear,
    Probit,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Run a standard grid: 1 varies confounding, 2 varies moderation.
    #[arg(long, conflicts_with_all = ["gamma", "theta"])]
    pub table: Option<u8>,

    /// Confounding strength for a single scenario.
    #[arg(long, requires = "theta")]
    pub gamma: Option<f64>,

    /// Moderation strength for a single scenario.
    #[arg(long, requires = "gamma")]
    pub theta: Option<f64>,

    /// Replications per scenario.
    #[arg(long, conflicts_with = "quick")]
    pub reps: Option<usize>,

    /// Use 500 replications per scenario (wider Monte Carlo error).
    #[arg(long)]
    pub quick: bool,

    /// Sample size per replication.
    #[arg(long, default_value_t = 500)]
    pub n: usize,

    /// Master seed (default: the table seed, or 1).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Estimators to run (default: all five).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub estimators: Vec<TvMethod>,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: DataKind,

    #[arg(long, default_value_t = 500)]
    pub n: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Confounding strength (two-period data).
    #[arg(long, default_value_t = 0.4)]
    pub gamma: f64,

    /// Moderation strength (two-period data).
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,

    /// Keep the unobserved common cause `u` in two-period data.
    #[arg(long)]
    pub include_latent: bool,

    /// Add treatment and mediator moderation terms to mediation data.
    #[arg(long)]
    pub moderation: bool,

    /// Write to this file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Bootstrap replicates (0 disables the bootstrap).
    #[arg(long, default_value_t = 0)]
    pub boot: usize,

    /// Bootstrap seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Resample whole clusters identified by this column.
    #[arg(long)]
    pub cluster: Option<String>,

    #[arg(long, value_enum, default_value_t = PValue::Normal)]
    pub pvalue: PValue,
}

#[derive(Debug, Args)]
pub struct EstimateTvArgs {
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long)]
    pub outcome: String,

    #[arg(long)]
    pub a1: String,

    #[arg(long)]
    pub a2: String,

    /// Baseline confounders.
    #[arg(long, value_delimiter = ',')]
    pub c1: Vec<String>,

    /// Post-treatment confounders.
    #[arg(long, value_delimiter = ',')]
    pub c2: Vec<String>,

    #[arg(long, value_enum)]
    pub method: TvMethod,

    /// Treatments are continuous rather than 0/1.
    #[arg(long)]
    pub continuous: bool,

    /// Truncate IPTW weights at this quantile and its mirror.
    #[arg(long)]
    pub trim_quantile: Option<f64>,

    /// Fully saturated interaction model (one confounder per period).
    #[arg(long)]
    pub saturated: bool,

    /// First-stage model for binary confounders.
    #[arg(long, value_enum, default_value_t = FirstStageArg::Linear)]
    pub first_stage: FirstStageArg,

    #[command(flatten)]
    pub bootstrap: BootstrapArgs,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EstimateMedArgs {
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long)]
    pub outcome: String,

    #[arg(long)]
    pub treatment: String,

    #[arg(long)]
    pub mediator: String,

    /// Baseline confounders.
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<String>,

    /// Post-treatment confounders.
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<String>,

    /// Mediator value for the controlled direct effect.
    #[arg(long, allow_hyphen_values = true)]
    pub cde_at: f64,

    #[arg(long, value_enum)]
    pub method: MedMethod,

    /// Treatment is continuous rather than 0/1.
    #[arg(long)]
    pub continuous: bool,

    #[command(flatten)]
    pub bootstrap: BootstrapArgs,

    #[command(flatten)]
    pub output: OutputArgs,
}
