use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::OutputFormat;

/// Minimax mean estimation under heterogeneous differential privacy.
#[derive(Debug, Parser)]
#[command(name = "hdp-mean", version = env!("HDP_MEAN_VERSION"))]
pub struct Cli {
    /// Master seed; overrides HDP_MEAN_SEED and any seed in a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for simulations and audits (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal ADPM weights, noise scale and per-user privacy certificate.
    Weights(WeightsArgs),
    /// Upper and lower minimax bounds for a two-group profile.
    Bounds(BoundsArgs),
    /// Monte Carlo MSE of one or more mechanisms.
    Simulate(SimulateArgs),
    /// Privacy certificates plus an empirical neighbouring-dataset ratio test.
    Audit(AuditArgs),
    /// Regenerates the data behind a comparison figure or table.
    Reproduce(ReproduceArgs),
}

/// Either a two-group profile or a file of per-user levels.
#[derive(Debug, Clone, Default, Args)]
pub struct PrivacyArgs {
    /// Level of the first group.
    #[arg(long, requires_all = ["eps2", "n", "f"], conflicts_with = "eps_file", allow_negative_numbers = true)]
    pub eps1: Option<f64>,
    /// Level of the second group; `inf` for public data.
    #[arg(long, requires = "eps1", allow_negative_numbers = true)]
    pub eps2: Option<f64>,
    /// Number of users.
    #[arg(long, requires = "eps1")]
    pub n: Option<u64>,
    /// Fraction of users in the first group.
    #[arg(long, requires = "eps1", allow_negative_numbers = true)]
    pub f: Option<f64>,
    /// One level per line, `inf` allowed.
    #[arg(long, value_name = "PATH")]
    pub eps_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Write here instead of stdout.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WeightsArgs {
    #[command(flatten)]
    pub privacy: PrivacyArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub eps1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub eps2: f64,
    #[arg(long)]
    pub n: u64,
    #[arg(long, allow_negative_numbers = true)]
    pub f: f64,
    /// `eps2:LO:HI:STEPS`, evenly spaced and inclusive; replaces --eps2.
    #[arg(long, value_name = "SPEC")]
    pub sweep: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub privacy: PrivacyArgs,
    /// Comma-separated subset of adpm, uni, sm, propdpm, ldpe, stretch, or `all`.
    #[arg(long = "mechanism", short, value_delimiter = ',', default_value = "all")]
    pub mechanisms: Vec<String>,
    /// uniform, rademacher, beta23, point:V or lecam:DELTA[:+|-].
    #[arg(long, default_value = "uniform")]
    pub dist: String,
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,
    /// Clamp every estimate to [-0.5, 0.5].
    #[arg(long)]
    pub clamp: bool,
    /// Take every experiment setting from this JSON document instead of flags.
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with_all = ["eps1", "eps_file", "mechanisms", "dist", "trials", "clamp"]
    )]
    pub config: Option<PathBuf>,
    /// Also write the resolved settings as a JSON document.
    #[arg(long, value_name = "PATH")]
    pub save_config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub privacy: PrivacyArgs,
    #[arg(long = "mechanism", short, value_delimiter = ',', default_value = "all")]
    pub mechanisms: Vec<String>,
    /// Users to audit (default: first and last).
    #[arg(long = "user", value_delimiter = ',')]
    pub users: Vec<usize>,
    /// Releases per neighbouring dataset.
    #[arg(long, default_value_t = 1_000_000)]
    pub draws: u64,
    #[arg(long, default_value_t = 0.05)]
    pub bin_width: f64,
    /// Tolerance band in binomial standard deviations.
    #[arg(long, default_value_t = 4.0)]
    pub sigmas: f64,
    /// Value every other user holds.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub base: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Fig1a,
    Fig1b,
    WeightRatio,
    Table2,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Fig1a => "fig1a",
            Target::Fig1b => "fig1b",
            Target::WeightRatio => "weight-ratio",
            Target::Table2 => "table2",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub target: Target,
    /// Monte Carlo trials per point.
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,
    /// Directory for the CSV files and manifest.json (created if missing).
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out_dir: PathBuf,
}
