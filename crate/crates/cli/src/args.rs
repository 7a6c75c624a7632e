use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "netmatch",
    version,
    about = "Direct-effect estimation on networks by matching on neighborhood subgraphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count neighborhood subgraphs of every unit.
    Census(CensusArgs),
    /// Estimate the direct effect by matching, optionally with baselines.
    Estimate(EstimateArgs),
    /// Run a simulation preset or configuration.
    Simulate(SimulateArgs),
    /// Run the comparison estimators only.
    Baselines(BaselinesArgs),
    /// Mean graph distance between matched neighborhoods.
    EvaluateMatches(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV edge list with header `src,dst`.
    #[arg(long)]
    pub edges: PathBuf,
    /// CSV unit table with header `id,treated,outcome[,covariates...]`.
    #[arg(long)]
    pub units: PathBuf,
    /// Drop units whose degree exceeds this cap before anything else.
    #[arg(long)]
    pub max_degree: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CensusOptArgs {
    /// Neighborhood radius.
    #[arg(long, default_value_t = 1)]
    pub hops: usize,
    /// Largest subgraph counted.
    #[arg(long, default_value_t = 5)]
    pub motif_size: usize,
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub census: CensusOptArgs,
    /// Also write the interference components of every unit.
    #[arg(long)]
    pub components: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub census: CensusOptArgs,
    /// Coarsen counts into this many quantile bins (exact counts if absent).
    #[arg(long)]
    pub bins: Option<usize>,
    /// JSON matcher configuration; the flags below override it.
    #[arg(long)]
    pub match_config: Option<PathBuf>,
    /// Balancing-factor weight.
    #[arg(long)]
    pub c: Option<f64>,
    /// Network-fit weight.
    #[arg(long)]
    pub d: Option<f64>,
    /// Ridge penalty of the outcome model.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Holdout fraction for the outcome model.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `all`, `none`, or a comma-separated list of baseline names.
    #[arg(long, default_value = "none")]
    pub baselines: String,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Named preset.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    /// JSON simulation configuration (one object or an array).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the replication count.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// `all` or a comma-separated list of baseline names.
    #[arg(long, default_value = "all")]
    pub methods: String,
    /// Treatment probability for SANIA (observed share if absent).
    #[arg(long)]
    pub treatment_probability: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Matched-groups CSV written by `estimate`.
    #[arg(long)]
    pub groups: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}
