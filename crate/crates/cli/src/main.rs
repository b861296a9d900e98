//! `aaip`: generate data, fit attentional bias weights, compare against IRL
//! baselines, run recovery sweeps and export plot data.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use aaip_core::planner::DEFAULT_BETA;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser, Serialize, Deserialize)]
#[command(name = "aaip", version, about = "Attention-aware inverse planning")]
pub struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate agents and write a JSON-lines dataset with a manifest.
    Generate(GenerateArgs),
    /// Maximum-likelihood bias weights for one agent of a dataset.
    Fit(FitArgs),
    /// Noise, IRL and AAIP fits on a single-scenario dataset.
    Compare(CompareArgs),
    /// Generate-then-fit parameter recovery over many simulated agents.
    Sweep(SweepArgs),
    /// Turn a finished run directory into per-figure CSV/JSON files.
    ExportPlots(ExportArgs),
    /// Check scenario files and report every problem found.
    ValidateScenario(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Tabular,
    Continuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Gradient,
    NelderMead,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ContinuousArgs {
    /// Rollouts per construal for the behavioral utility.
    #[arg(long, default_value_t = 40)]
    pub mc_samples: usize,
    /// Multiplier on the action noise used as likelihood kernel width.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth: f64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "tabular")]
    pub domain: Domain,
    /// Scenario file, or a built-in name (fig1, fig3, or a continuous scene id). Repeatable.
    #[arg(long = "scenario")]
    pub scenario: Vec<String>,
    /// How many tabular scenarios to generate when none is given.
    #[arg(long = "scenarios", default_value_t = 25)]
    pub n_scenarios: usize,
    #[arg(long, default_value_t = 1)]
    pub agents: usize,
    /// Trajectories per agent and scenario.
    #[arg(long, visible_alias = "per-scene", default_value_t = 5)]
    pub per_scenario: usize,
    /// Bias weights shared by every agent; drawn per agent when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Option<Vec<f64>>,
    /// Uniform range `lo,hi` for drawn weights (tabular only).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda_range: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[command(flatten)]
    pub continuous: ContinuousArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Run directory written by `generate`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Agent to fit; defaults to the first one.
    #[arg(long)]
    pub agent: Option<u64>,
    /// Defaults to gradient for tabular data and Nelder-Mead for continuous.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Search box `lo,hi` applied to every weight.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bounds: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    /// Run directory with a single-scenario tabular dataset. Without it a
    /// dataset is simulated on `--scenario`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value = "fig3")]
    pub scenario: String,
    #[arg(long, default_value_t = 100)]
    pub trajectories: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-10,10,0")]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    /// Nelder-Mead restarts per IRL variant.
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "tabular")]
    pub domain: Domain,
    /// Simulated agents (default 100 tabular, 30 continuous).
    #[arg(long)]
    pub agents: Option<usize>,
    #[arg(long = "scenarios", default_value_t = 25)]
    pub n_scenarios: usize,
    #[arg(long, default_value_t = 5)]
    pub per_scenario: usize,
    /// Trajectories per agent at which continuous fits are repeated.
    #[arg(long, value_delimiter = ',', default_value = "20,80")]
    pub sizes: Vec<usize>,
    /// Uniform range `lo,hi` for tabular weights.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-50,50")]
    pub lambda_range: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[command(flatten)]
    pub continuous: ContinuousArgs,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ExportArgs {
    /// Directory of a finished run.
    #[arg(long)]
    pub run: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    /// Tabular or continuous scenario files.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(run::exit_code(&e))
        }
    }
}
