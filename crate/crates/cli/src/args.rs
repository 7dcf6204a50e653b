use std::path::PathBuf;

use cascademix::Window;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cascademix",
    version,
    about = "Mixture-of-cascades inference and intervention runs"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Unset flags fall back to `--config`, then defaults.
#[derive(Debug, Default, Args)]
pub struct GlobalArgs {
    /// TOML file with defaults for any of the flags below
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Line-delimited JSON cascades
    #[arg(long, global = true, value_name = "PATH")]
    pub cascades: Option<PathBuf>,
    /// Follower edge list, `follower followee` per line
    #[arg(long, global = true, value_name = "PATH")]
    pub followers: Option<PathBuf>,
    /// Model JSON written by `infer`
    #[arg(long, global = true, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Parent window, `events:N`, `events:inf` or `time:HOURS`
    #[arg(long, global = true, value_parser = parse_window)]
    pub window: Option<Window>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Mixture components
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// EM initialisation seed (defaults to --seed)
    #[arg(long, global = true)]
    pub init_seed: Option<u64>,
    /// Monte Carlo rounds per spread estimate
    #[arg(long, global = true)]
    pub rounds: Option<usize>,
    /// Master random seed
    #[arg(long, global = true, env = "CASCADEMIX_SEED")]
    pub seed: Option<u64>,
    /// Multiplier from input timestamps to hours, e.g. 0.000277778 for seconds
    #[arg(long, global = true)]
    pub time_scale: Option<f64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Allow writing into a non-empty output directory
    #[arg(long, global = true)]
    pub force: bool,
}

fn parse_window(s: &str) -> Result<Window, String> {
    s.parse().map_err(|e: cascademix::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic benchmark: random graph, two IC components, labelled cascade sets
    Generate(GenerateArgs),
    /// Fit a mixture of independent cascades
    Infer,
    /// Assign cascades to components and score against labels
    Cluster(ClusterArgs),
    /// Temporal and structural tests between fake and true cascades
    Stats,
    /// Greedy top influencers per component
    Influencers(InfluencerArgs),
    /// Node and edge intervention curves
    Intervene(InterveneArgs),
    /// Print cascades in canonical form
    Dump,
    /// Recoverability and separability curves over a generated benchmark
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 512)]
    pub nodes: usize,
    #[arg(long, default_value_t = 1024)]
    pub edges: usize,
    /// π_true of each mixture
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.2, 0.35])]
    pub mixtures: Vec<f64>,
    /// Cascades per set
    #[arg(long, value_delimiter = ',', default_values_t = [100, 500, 1000, 2000, 5000])]
    pub sizes: Vec<usize>,
    /// Power-law exponent of the seed-set size
    #[arg(long, default_value_t = 2.5)]
    pub seed_exponent: f64,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Fraction of labelled cascades used to name clusters
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
}

#[derive(Debug, Args)]
pub struct InfluencerArgs {
    /// Influencers per component
    #[arg(long, default_value_t = cascademix::influence::DEFAULT_TOP_K)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct InterveneArgs {
    /// Budgets; values above the number of candidates are dropped
    #[arg(long, value_delimiter = ',', default_values_t = [1, 5, 10, 20, 50, 100])]
    pub budgets: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub bench: GenerateArgs,
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
}
