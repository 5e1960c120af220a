//! Monte-Carlo replication of the coefficient and prediction summaries.
//!
//! Every replicate draws its own training and test data from seeds derived
//! from `(seed, shape, n, rep)`, so replicates are independent of each other
//! and of the worker count.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{estimate_propensity, Dataset};
use crate::efficiency::{imave2_refit, GEstimate};
use crate::error::{Error, Result};
use crate::fit::{imave_fit, EtaMode, FitConfig, FitResult};
use crate::metrics::{
    classification_rate, coefficient_ratios, quantile, rank_correlation_with, summarize_ratios, RankStatistic,
};
use crate::parallel::map_indexed;
use crate::simulation::{derive_seed, generate_data, Assignment, GShape, ScenarioSpec, LOGISTIC_ASSIGNMENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Imave,
    Imave2,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Imave => "imave",
            Estimator::Imave2 => "imave2",
        }
    }
}

/// Whether the fits use the true propensities or a logistic estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityMode {
    /// Balanced assignment, `pi = 1/2` supplied.
    #[default]
    Known,
    /// Logistic assignment with coefficients `(0.2, -0.2, 0.2, -0.2)`,
    /// propensities refitted by logistic regression.
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub shapes: Vec<GShape>,
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub propensity: PropensityMode,
    /// Test-set size for the prediction metrics; `0` skips them.
    pub test_size: usize,
    pub rank_statistic: RankStatistic,
    pub fit: FitConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            shapes: alloc::vec![GShape::Linear, GShape::Gaussian, GShape::Logistic],
            sizes: alloc::vec![200, 500, 1000],
            reps: 200,
            seed: 0,
            propensity: PropensityMode::Known,
            test_size: 10_000,
            rank_statistic: RankStatistic::Spearman,
            fit: FitConfig::default(),
        }
    }
}

/// Test-set agreement of one fitted model with the true contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionScores {
    /// `B_hat^T x` against `beta_0^T x`.
    pub rank_index: f64,
    pub class_index: f64,
    /// `g_hat(B_hat^T x)` against `g(beta_0^T x)`.
    pub rank_g: f64,
    pub class_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub shape: GShape,
    pub n: usize,
    pub rep: usize,
    pub estimator: Estimator,
    /// `beta_j / beta_1`, `j = 2..p`.
    pub ratios: Vec<f64>,
    pub distance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub scores: Option<PredictionScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub shape: GShape,
    pub n: usize,
    pub rep: usize,
    pub code: String,
}

/// One line of the coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub scenario: String,
    pub n: usize,
    pub estimator: String,
    pub ratio: String,
    pub mean: f64,
    pub sqrt_mse: f64,
}

/// Quartiles of the prediction metrics of one method in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scenario: String,
    pub n: usize,
    pub method: String,
    pub rank_corr_q25: f64,
    pub rank_corr_q50: f64,
    pub rank_corr_q75: f64,
    pub class_rate_q25: f64,
    pub class_rate_q50: f64,
    pub class_rate_q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub records: Vec<ReplicateRecord>,
    pub failures: Vec<ReplicateFailure>,
    pub table: Vec<TableRow>,
    pub metrics: Vec<MetricRow>,
}

impl StudySummary {
    /// Records of one cell and estimator, in replicate order.
    pub fn cell(&self, shape: GShape, n: usize, estimator: Estimator) -> Vec<&ReplicateRecord> {
        self.records.iter().filter(|r| r.shape == shape && r.n == n && r.estimator == estimator).collect()
    }

    pub fn row(&self, shape: GShape, n: usize, estimator: Estimator, ratio: usize) -> Option<&TableRow> {
        let label = format!("b{ratio}/b1");
        self.table
            .iter()
            .find(|r| r.scenario == shape.name() && r.n == n && r.estimator == estimator.name() && r.ratio == label)
    }

    pub fn metric(&self, shape: GShape, n: usize, method: &str) -> Option<&MetricRow> {
        self.metrics.iter().find(|r| r.scenario == shape.name() && r.n == n && r.method == method)
    }
}

/// The scenario of one replicate's training data.
pub fn scenario(shape: GShape, n: usize, mode: PropensityMode, seed: u64) -> ScenarioSpec {
    let mut spec = ScenarioSpec::standard(shape, n, seed);
    if mode == PropensityMode::Estimated {
        spec.assignment = Assignment::Logistic(LOGISTIC_ASSIGNMENT.to_vec());
    }
    spec
}

/// `b_hat` oriented so that the fitted contrast increases along it at most
/// anchors (nonnegative median local slope).
fn oriented_direction(fit: &FitResult) -> Vec<f64> {
    let slopes: Vec<f64> = fit.local_fits.iter().map(|f| f.b[(0, 0)]).collect();
    let s = if quantile(&slopes, 0.5).unwrap_or(0.0) < 0.0 { -1.0 } else { 1.0 };
    fit.b.matrix().column(0).iter().map(|v| s * v).collect()
}

struct TestSet {
    x: Vec<f64>,
    p: usize,
    index: Vec<f64>,
    g: Vec<f64>,
}

fn prediction_scores(train: &Dataset, fit: &FitResult, test: &TestSet, cfg: &StudyConfig) -> Result<PredictionScores> {
    let b = oriented_direction(fit);
    let index: Vec<f64> = test.x.chunks(test.p).map(|row| row.iter().zip(&b).map(|(a, c)| a * c).sum()).collect();
    let ghat = GEstimate::new(train, &fit.b, cfg.fit.smoother.kernel, cfg.fit.smoother.h_g)?;
    let g: Vec<f64> = ghat.predict_rows(&test.x)?.into_iter().map(|s| s.value()).collect();
    let stat = cfg.rank_statistic;
    Ok(PredictionScores {
        rank_index: rank_correlation_with(&index, &test.index, stat)?,
        class_index: classification_rate(&index, &test.index)?,
        rank_g: rank_correlation_with(&g, &test.g, stat)?,
        class_g: classification_rate(&g, &test.g)?,
    })
}

fn record(
    shape: GShape,
    n: usize,
    rep: usize,
    estimator: Estimator,
    fit: &FitResult,
    truth: &crate::index::IndexMatrix,
    scores: Option<PredictionScores>,
) -> ReplicateRecord {
    ReplicateRecord {
        shape,
        n,
        rep,
        estimator,
        ratios: coefficient_ratios(fit.b.matrix()),
        distance: fit.b.subspace_distance(truth.matrix()),
        iterations: fit.iterations,
        converged: fit.converged,
        scores,
    }
}

/// Both estimators on one replicate of one cell.
pub fn run_replicate(shape: GShape, n: usize, rep: usize, cfg: &StudyConfig) -> Result<[ReplicateRecord; 2]> {
    let cell_seed = derive_seed(cfg.seed, &[shape as u64, n as u64, rep as u64]);
    let sim = generate_data(&scenario(shape, n, cfg.propensity, derive_seed(cell_seed, &[0])))?;
    let train = match cfg.propensity {
        PropensityMode::Known => sim.dataset.clone(),
        PropensityMode::Estimated => sim.dataset.with_propensity(&estimate_propensity(&sim.dataset)?.model)?,
    };
    let test = if cfg.test_size > 0 {
        let t = generate_data(&scenario(shape, cfg.test_size, cfg.propensity, derive_seed(cell_seed, &[1])))?;
        Some(TestSet { x: t.dataset.x_rows().to_vec(), p: t.dataset.p(), index: t.index, g: t.g })
    } else {
        None
    };
    let first = imave_fit(&train, 1, EtaMode::Zero, &cfg.fit)?;
    let second = imave2_refit(&train, &first, &cfg.fit)?;
    let score = |fit: &FitResult| test.as_ref().map(|t| prediction_scores(&train, fit, t, cfg)).transpose();
    Ok([
        record(shape, n, rep, Estimator::Imave, &first, &sim.b0, score(&first)?),
        record(shape, n, rep, Estimator::Imave2, &second, &sim.b0, score(&second)?),
    ])
}

fn quartiles(v: &[f64]) -> (f64, f64, f64) {
    let q = |p| quantile(v, p).unwrap_or(f64::NAN);
    (q(0.25), q(0.5), q(0.75))
}

/// `run_replication_study`: every `(shape, n)` cell with `reps` replicates of
/// iMAVE and iMAVE2. Failed replicates are reported and skipped.
pub fn run_replication_study(cfg: &StudyConfig) -> Result<StudySummary> {
    if cfg.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".to_string()));
    }
    if cfg.shapes.contains(&GShape::TwoIndexGaussian) {
        return Err(Error::InvalidConfig("the replication study covers single-index shapes".to_string()));
    }
    let cells: Vec<(GShape, usize)> = cfg.shapes.iter().flat_map(|&s| cfg.sizes.iter().map(move |&n| (s, n))).collect();
    let jobs = cells.len() * cfg.reps;
    let outcomes = map_indexed(jobs, |k| {
        let (shape, n) = cells[k / cfg.reps];
        (shape, n, k % cfg.reps, run_replicate(shape, n, k % cfg.reps, cfg))
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (shape, n, rep, out) in outcomes {
        match out {
            Ok(pair) => records.extend(pair),
            Err(e) => failures.push(ReplicateFailure { shape, n, rep, code: e.code().to_string() }),
        }
    }
    let mut table = Vec::new();
    let mut metrics = Vec::new();
    for &(shape, n) in &cells {
        for estimator in [Estimator::Imave, Estimator::Imave2] {
            let rows: Vec<&ReplicateRecord> =
                records.iter().filter(|r| r.shape == shape && r.n == n && r.estimator == estimator).collect();
            let ratios: Vec<Vec<f64>> = rows.iter().map(|r| r.ratios.clone()).collect();
            for s in summarize_ratios(&ratios) {
                table.push(TableRow {
                    scenario: shape.name().to_string(),
                    n,
                    estimator: estimator.name().to_string(),
                    ratio: format!("b{}/b1", s.ratio),
                    mean: s.mean,
                    sqrt_mse: s.sqrt_mse,
                });
            }
            let scores: Vec<PredictionScores> = rows.iter().filter_map(|r| r.scores).collect();
            if scores.is_empty() {
                continue;
            }
            let variants: [(String, fn(&PredictionScores) -> (f64, f64)); 2] = [
                (estimator.name().to_string(), |s| (s.rank_g, s.class_g)),
                (format!("{}(index)", estimator.name()), |s| (s.rank_index, s.class_index)),
            ];
            for (method, pick) in variants {
                let (rank, class): (Vec<f64>, Vec<f64>) = scores.iter().map(pick).unzip();
                let (r25, r50, r75) = quartiles(&rank);
                let (c25, c50, c75) = quartiles(&class);
                metrics.push(MetricRow {
                    scenario: shape.name().to_string(),
                    n,
                    method,
                    rank_corr_q25: r25,
                    rank_corr_q50: r50,
                    rank_corr_q75: r75,
                    class_rate_q25: c25,
                    class_rate_q50: c50,
                    class_rate_q75: c75,
                });
            }
        }
    }
    Ok(StudySummary { records, failures, table, metrics })
}
