use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "gpsselect", version, about = "Regularization paths with tracked degrees of freedom")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Fit a path on a CSV file and select the tuning parameter.
    Fit(FitArgs),
    /// Monte Carlo study on one of the built-in designs.
    Simulate(SimulateArgs),
    /// Time the dense and reduced trackers.
    Bench(BenchArgs),
    /// Check the main routines against independent reference computations.
    Verify(VerifyArgs),
    /// Re-run a command from the manifest embedded in its output.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Simulate(_) => "simulate",
            Command::Bench(_) => "bench",
            Command::Verify(_) => "verify",
            Command::Replay(_) => "replay",
        }
    }

    pub fn output(&self) -> Option<&PathBuf> {
        match self {
            Command::Fit(a) => a.out.as_ref(),
            Command::Simulate(a) => a.out.as_ref(),
            Command::Bench(a) => a.out.as_ref(),
            Command::Verify(a) => a.out.as_ref(),
            Command::Replay(a) => a.out.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DfChoice {
    Dense,
    #[default]
    Reduced,
    /// Compute both and report their largest difference.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AiccSign {
    #[default]
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tau2Source {
    True,
    #[default]
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    #[default]
    Slopes,
    FullMean,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub response: String,
    /// lasso, enet or genet.
    #[arg(long, default_value = "lasso")]
    pub penalty: String,
    /// Mixing parameter for enet and genet (default 0.5).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Step budget used to size the increment automatically.
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    /// Fixed coefficient increment; overrides the step budget.
    #[arg(long)]
    pub delta_t: Option<f64>,
    #[arg(long)]
    pub max_vars: Option<usize>,
    /// cp, aic, aicc, bic, gcv, cv or all. Repeatable.
    #[arg(long, default_values_t = vec!["cp".to_string()])]
    pub criterion: Vec<String>,
    /// `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    pub tau2: String,
    #[arg(long, value_enum, default_value_t = DfChoice::Reduced)]
    pub df: DfChoice,
    /// Report every r-th step (selected steps are always reported).
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    /// Seed for the cross-validation fold assignment.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = AiccSign::Plus)]
    pub aicc_form: AiccSign,
    /// Predictor (1-based index or name) whose gradient trace is reported.
    #[arg(long)]
    pub trace_var: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Directory for two-column text files of the path and df curves.
    #[arg(long)]
    #[serde(skip)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Built-in design, 1 to 4.
    #[arg(long)]
    pub example: u8,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// lasso, enet or genet. Repeatable.
    #[arg(long, default_values_t = vec!["lasso".to_string()])]
    pub penalty: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_values_t = vec!["all".to_string()])]
    pub criterion: Vec<String>,
    /// Error variance used by Cp, AIC and BIC.
    #[arg(long, value_enum, default_value_t = Tau2Source::Estimated)]
    pub tau2: Tau2Source,
    /// Compare the tracked df with the nonzero count inside Cp (lasso,
    /// true error variance).
    #[arg(long)]
    pub compare_df: bool,
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = Target::Slopes)]
    pub error_target: Target,
    #[arg(long, value_enum, default_value_t = AiccSign::Plus)]
    pub aicc_form: AiccSign,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![100, 200, 500])]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// CSV file; a random design is generated when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_values_t = vec!["lasso".to_string(), "enet".to_string(), "genet".to_string()])]
    pub penalty: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Output of an earlier run, or a bare manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
