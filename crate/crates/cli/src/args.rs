use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use surveykit::estimators::{KValue, Sign};

#[derive(Debug, Parser)]
#[command(
    name = "surveykit",
    version,
    about = "Ratio, product and exponential estimators of a finite-population mean: theory, weights and verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print population parameters and finite-population factors.
    Params(ParamsArgs),
    /// Tabulate analytic PRE of family members over a grid of K constants.
    Members(MembersArgs),
    /// Solve the bias-cancelling weights of the combined estimator.
    Weights(WeightsArgs),
    /// Compare first-order theory with exhaustive enumeration or Monte Carlo.
    Verify(VerifyArgs),
    /// Write a synthetic population as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Markdown,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Enumerate,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    T1,
    T2,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SourceArgs {
    /// Population CSV with `y` and `x` columns.
    #[arg(long, value_name = "PATH")]
    pub pop: Option<PathBuf>,
    /// Synthetic population spec: inline JSON or a path to a JSON file.
    #[arg(long, value_name = "JSON", conflicts_with = "pop")]
    pub synthetic: Option<String>,
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DesignArgs {
    /// Sample size (second-phase size in two-phase designs).
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// First-phase sample size; switches to a two-phase design.
    #[arg(long = "n-prime")]
    pub n_prime: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FamilyArgs {
    /// Parameter atom name or literal number.
    #[arg(long, allow_hyphen_values = true)]
    pub k1: Option<KValue>,
    #[arg(long, allow_hyphen_values = true)]
    pub k2: Option<Sign>,
    #[arg(long, allow_hyphen_values = true)]
    pub k3: Option<KValue>,
    #[arg(long, allow_hyphen_values = true)]
    pub k4: Option<KValue>,
    #[arg(long, allow_hyphen_values = true)]
    pub k5: Option<KValue>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long = "m", allow_negative_numbers = true)]
    pub m: Option<f64>,
    #[arg(long = "q", allow_negative_numbers = true)]
    pub q: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MembersArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Which family to tabulate.
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// K1 atoms; crossed with --k3-atoms. Without atom lists the appendix grid is used.
    #[arg(long, value_delimiter = ',')]
    pub k1_atoms: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub k3_atoms: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub k4_atoms: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub k5_atoms: Vec<String>,
    /// K2 columns, any of +1 and -1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub k2_values: Vec<Sign>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct WeightsArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Monte Carlo replicates.
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long, env = "SURVEYKIT_SEED")]
    pub seed: Option<u64>,
    /// Bias tolerance, in standard errors of the sample mean.
    #[arg(long)]
    pub tol_bias: Option<f64>,
    /// MSE tolerance, relative to the analytic MSE.
    #[arg(long)]
    pub tol_mse: Option<f64>,
    /// Estimators to compare, e.g. mean,ratio,t1,t2,tp.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Synthetic population spec: inline JSON or a path to a JSON file.
    #[arg(long, value_name = "JSON")]
    pub synthetic: String,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
