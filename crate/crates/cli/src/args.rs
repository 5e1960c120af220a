//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use imave::fit::{BandwidthConfig, SmootherConfig};
use imave::{FitConfig, GShape, KernelFamily, RankStatistic};

#[derive(Debug, Parser)]
#[command(name = "imave", version, about = "Index estimation of treatment-effect contrasts")]
pub struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, env = "IMAVE_THREADS")]
    pub threads: Option<usize>,
    /// Flat TOML file of flag values. Flags given on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the index with the alternating weighted least-squares estimator.
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Fit, estimate E[eps | X], then refit with it as the offset.
    #[command(args_override_self = true)]
    Fit2(FitArgs),
    /// Smoothed contrast at new covariate rows for a fitted model.
    #[command(args_override_self = true)]
    Predict(PredictArgs),
    /// Choose the index dimension by cross-validation.
    #[command(args_override_self = true)]
    Dimselect(DimselectArgs),
    /// Generate a simulated dataset and its ground truth.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Score per-row predictions against the truth and a test dataset.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Run the Monte-Carlo replication study.
    #[command(args_override_self = true)]
    Study(StudyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Fit2(_) => "fit2",
            Command::Predict(_) => "predict",
            Command::Dimselect(_) => "dimselect",
            Command::Simulate(_) => "simulate",
            Command::Evaluate(_) => "evaluate",
            Command::Study(_) => "study",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Epanechnikov,
    #[value(alias = "quadratic")]
    Biweight,
    Gaussian,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Epanechnikov => KernelFamily::Epanechnikov,
            KernelArg::Biweight => KernelFamily::Biweight,
            KernelArg::Gaussian => KernelFamily::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EtaArg {
    Zero,
    /// `(1 - 2 pi(X)) g(B^T X)`, updated from the local fits.
    #[value(name = "song_pi", alias = "song-pi")]
    SongPi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PropensityArg {
    /// The `pi` column when present, otherwise a logistic fit.
    Auto,
    /// Require the `pi` column.
    Known,
    /// Logistic regression of the treatment on the covariates.
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Linear,
    Logistic,
    Gaussian,
    #[value(name = "two_index_gaussian", alias = "two-index-gaussian")]
    TwoIndexGaussian,
}

impl From<ScenarioArg> for GShape {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Linear => GShape::Linear,
            ScenarioArg::Logistic => GShape::Logistic,
            ScenarioArg::Gaussian => GShape::Gaussian,
            ScenarioArg::TwoIndexGaussian => GShape::TwoIndexGaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankArg {
    Spearman,
    Kendall,
}

impl From<RankArg> for RankStatistic {
    fn from(r: RankArg) -> Self {
        match r {
            RankArg::Spearman => RankStatistic::Spearman,
            RankArg::Kendall => RankStatistic::Kendall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssignmentArg {
    Balanced,
    /// `P(T = +1 | X) = logistic(0.2 x1 - 0.2 x2 + 0.2 x3 - 0.2 x4)`.
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyPropensityArg {
    Known,
    Estimated,
}

/// Input table and how to prepare it.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV with columns y, t, optional pi, x1..xp.
    #[arg(long, value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub propensity: PropensityArg,
    /// Centre and scale each covariate before fitting.
    #[arg(long)]
    pub standardize: bool,
    /// Treatment labels in level order, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<String>>,
}

/// Estimator tuning shared by every fitting command.
#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    #[arg(long, value_enum, default_value = "epanechnikov")]
    pub kernel: KernelArg,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c3: Option<f64>,
    #[arg(long)]
    pub rh: Option<f64>,
    #[arg(long)]
    pub rh_prime: Option<f64>,
    /// Bandwidth of the smoother for g.
    #[arg(long)]
    pub h_g: Option<f64>,
    /// Bandwidth of the smoother for E[eps | X].
    #[arg(long)]
    pub h_eta: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = imave::fit::DEFAULT_RIDGE)]
    pub ridge: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TuningArgs {
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            kernel: self.kernel.into(),
            bandwidth: BandwidthConfig { c1: self.c1, c3: self.c3, rh: self.rh, rh_prime: self.rh_prime },
            ridge: self.ridge,
            seed: self.seed,
            smoother: SmootherConfig { kernel: self.kernel.into(), h_g: self.h_g, h_eta: self.h_eta },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Index dimension.
    #[arg(long)]
    pub d: usize,
    /// Offset subtracted from the outcome (`fit` only).
    #[arg(long, value_enum, default_value = "zero")]
    pub eta: EtaArg,
    /// JSON list of the rows of the contrast matrix. Defaults to (1, -1) for
    /// two levels and successive differences otherwise.
    #[arg(long, value_name = "JSON")]
    pub contrast: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Model JSON destination; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Model JSON written by `fit` or `fit2`.
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    /// The training CSV the model was fitted on.
    #[arg(long, value_name = "CSV")]
    pub train: PathBuf,
    /// Rows to predict at (only x1..xp are read); defaults to the training rows.
    #[arg(long, value_name = "CSV")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DimselectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Largest candidate dimension; defaults to min(p, 4).
    #[arg(long)]
    pub d_max: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Split observations at random instead of dealing each arm separately.
    #[arg(long)]
    pub no_stratify: bool,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "balanced")]
    pub assignment: AssignmentArg,
    #[arg(long, value_name = "CSV")]
    pub output: PathBuf,
    /// Ground-truth JSON; defaults to `<output>.truth.json`.
    #[arg(long, value_name = "JSON")]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// CSV of per-row scores; the rule is their sign.
    #[arg(long, value_name = "CSV")]
    pub predictions: PathBuf,
    /// Score column in the predictions file.
    #[arg(long, default_value = "g")]
    pub column: String,
    /// Observed test data for the benefit metrics.
    #[arg(long, value_name = "CSV")]
    pub test: Option<PathBuf>,
    /// Truth JSON written by `simulate`, for rank correlation and
    /// classification rate.
    #[arg(long, value_name = "JSON")]
    pub truth: Option<PathBuf>,
    /// Model JSON whose coefficient ratios against 1 are reported.
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "spearman")]
    pub rank_statistic: RankArg,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "linear,gaussian,logistic")]
    pub scenarios: Vec<ScenarioArg>,
    #[arg(long, value_delimiter = ',', default_value = "200,500,1000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long = "study-propensity", value_enum, default_value = "known")]
    pub propensity: StudyPropensityArg,
    /// Test rows per replicate; 0 skips the prediction metrics.
    #[arg(long, default_value_t = 10_000)]
    pub test_size: usize,
    #[arg(long, value_enum, default_value = "spearman")]
    pub rank_statistic: RankArg,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Directory receiving table1.csv and metrics.csv.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}
