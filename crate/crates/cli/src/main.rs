//! `bnpmeta`: fit, compare and inspect Bayesian meta-analysis models from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifact;
mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Exit status when artifacts were written but a Monte Carlo estimate is not stabilized.
const EXIT_UNSTABLE: u8 = 3;

#[derive(Parser)]
#[command(name = "bnpmeta", version, about = "Bayesian meta-analysis with normal random-effects and infinite-mixture models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute effect sizes and sampling variances from summary statistics.
    Es(EsArgs),
    /// Normality test and kernel density of a column of effect sizes.
    Diagnose(DiagnoseArgs),
    /// Draw a synthetic meta-analysis from a generating model.
    Simulate(SimulateArgs),
    /// Fit one model by MCMC and write draws, summaries and D(m).
    Fit(FitArgs),
    /// Posterior predictive densities from a fitted run.
    Predict(PredictArgs),
    /// Rank fitted runs (or fit several specs) by D(m).
    Compare(CompareArgs),
    /// Mixture weights and induced densities for a range of σ_ω.
    WeightsDemo(WeightsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EsKind {
    /// columns mean1, mean2, var1, var2, n1, n2
    Hedges,
    /// columns rho, n
    Fisher,
    /// columns n11, n10, n01, n00
    LogOdds,
    /// columns rho_mz, n_mz, rho_dz, n_dz
    Falconer,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    #[default]
    AsPrinted,
    Literature,
}

#[derive(Args, Debug)]
pub struct EsArgs {
    #[arg(long, value_enum)]
    pub kind: EsKind,
    /// Table of inputs with the columns listed for the kind.
    #[arg(long, conflicts_with = "values")]
    pub data: Option<PathBuf>,
    /// One row of inputs, comma separated, in column order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t)]
    pub variant: VariantArg,
    /// Directory for es.csv; without it results go to stdout only.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub column: String,
    /// Fixed kernel bandwidth; Silverman's rule when omitted.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value_t = bnpmeta::diagnostics::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Flat key-value generator description.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DataArgs {
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub y_col: String,
    #[arg(long, default_value = "var")]
    pub var_col: String,
    #[arg(long, default_value = "study")]
    pub study_col: String,
    #[arg(long)]
    pub report_col: Option<String>,
    /// Covariate columns to use; every remaining column when omitted.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
    /// Keep covariates on their raw scale instead of z-standardizing them.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
pub struct McmcArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = bnpmeta::McmcConfig::default().burn)]
    pub burn: usize,
    #[arg(long, default_value_t = bnpmeta::McmcConfig::default().keep)]
    pub keep: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Allocation window half-width in units of σ_ω.
    #[arg(long, default_value_t = bnpmeta::McmcConfig::default().window)]
    pub window: f64,
    /// Half-width threshold for a stabilized Monte Carlo estimate.
    #[arg(long, default_value_t = bnpmeta::eval::STABLE_HALFWIDTH)]
    pub mcci_threshold: f64,
}

impl McmcArgs {
    pub fn config(&self, seed: u64) -> bnpmeta::McmcConfig {
        bnpmeta::McmcConfig {
            burn: self.burn,
            keep: self.keep,
            thin: self.thin,
            seed,
            window: self.window,
            ..bnpmeta::McmcConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Flat key-value model specification.
    #[arg(long)]
    pub spec: PathBuf,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub allow_unstable: bool,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub run: PathBuf,
    /// Covariate values on the raw scale as name=value; unlisted covariates sit at their mean.
    #[arg(long = "x", value_name = "NAME=VALUE")]
    pub x: Vec<String>,
    #[arg(long, default_value_t = 1e-4)]
    pub sigma_sq: f64,
    /// Covariate to sweep over its observed range.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, default_value_t = 25)]
    pub sweep_points: usize,
    #[arg(long, default_value_t = bnpmeta::diagnostics::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Run directories written by `fit`.
    #[arg(long, num_args = 1.., conflicts_with = "spec")]
    pub runs: Vec<PathBuf>,
    /// Model specifications to fit concurrently on `--data` before comparing.
    #[arg(long, num_args = 1.., requires = "data")]
    pub spec: Vec<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub y_col: String,
    #[arg(long, default_value = "var")]
    pub var_col: String,
    #[arg(long, default_value = "study")]
    pub study_col: String,
    #[arg(long)]
    pub report_col: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
    #[arg(long)]
    pub no_standardize: bool,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub allow_unstable: bool,
}

impl CompareArgs {
    pub fn data_args(&self) -> Option<DataArgs> {
        Some(DataArgs {
            data: self.data.clone()?,
            y_col: self.y_col.clone(),
            var_col: self.var_col.clone(),
            study_col: self.study_col.clone(),
            report_col: self.report_col.clone(),
            covariates: self.covariates.clone(),
            exclude: self.exclude.clone(),
            no_standardize: self.no_standardize,
        })
    }
}

#[derive(Args, Debug)]
pub struct WeightsArgs {
    #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
    pub eta: f64,
    #[arg(long = "sigma", value_delimiter = ',', default_values_t = [0.05, 0.5, 1.0, 2.0])]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = bnpmeta::McmcConfig::default().predict_window)]
    pub window: f64,
    /// Standard deviation of each component kernel in the induced density.
    #[arg(long, default_value_t = 0.25)]
    pub kernel_sd: f64,
    #[arg(long, default_value_t = bnpmeta::diagnostics::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Es(a) => commands::es::run(&a),
        Command::Diagnose(a) => commands::diagnose::run(&a),
        Command::Simulate(a) => commands::simulate::run(&a),
        Command::Fit(a) => commands::fit::run(&a),
        Command::Predict(a) => commands::predict::run(&a),
        Command::Compare(a) => commands::compare::run(&a),
        Command::WeightsDemo(a) => commands::weights::run(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: some Monte Carlo estimates are not stabilized (rerun with more draws or pass --allow-unstable)");
            ExitCode::from(EXIT_UNSTABLE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
