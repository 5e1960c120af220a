//! Scores for fitted contrasts: rank agreement, sign agreement and the
//! agree/disagree benefit contrasts of a treatment rule.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankStatistic {
    #[default]
    Spearman,
    /// Kendall's tau-b.
    Kendall,
}

impl RankStatistic {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spearman" => Some(RankStatistic::Spearman),
            "kendall" => Some(RankStatistic::Kendall),
            _ => None,
        }
    }
}

/// `+1` for nonnegative values, `-1` otherwise.
#[inline]
pub fn sign(v: f64) -> i32 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// One-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

fn kendall_tau_b(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len();
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i].total_cmp(&a[j]) as i64;
            let db = b[i].total_cmp(&b[j]) as i64;
            if da == 0 && db == 0 {
                continue;
            }
            if da == 0 {
                ties_a += 1;
            } else if db == 0 {
                ties_b += 1;
            } else if da == db {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let base = (concordant + discordant) as f64;
    let denom = libm::sqrt((base + ties_a as f64) * (base + ties_b as f64));
    if denom == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((concordant - discordant) as f64 / denom)
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch("score vectors differ in length".to_string()));
    }
    if a.len() < 2 {
        return Err(Error::DimensionMismatch("need at least two scores".to_string()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("scores".to_string()));
    }
    Ok(())
}

/// Spearman rank correlation with average ranks for ties.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    rank_correlation_with(a, b, RankStatistic::Spearman)
}

pub fn rank_correlation_with(a: &[f64], b: &[f64], stat: RankStatistic) -> Result<f64> {
    check_pair(a, b)?;
    match stat {
        RankStatistic::Spearman => pearson(&average_ranks(a), &average_ranks(b)),
        RankStatistic::Kendall => kendall_tau_b(a, b),
    }
}

/// Fraction of positions where `sign(pred) == sign(truth)`, zero counting as
/// positive.
pub fn classification_rate(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch("score vectors differ in length".to_string()));
    }
    if pred.is_empty() {
        return Err(Error::DimensionMismatch("no scores".to_string()));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| sign(**p) == sign(**t)).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Difference of two cell means with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanDifference {
    pub estimate: f64,
    /// `sqrt(s_1^2 / n_1 + s_2^2 / n_2)`; absent when a cell has one member.
    pub std_error: Option<f64>,
}

/// `Delta_1` and `Delta_{-1}` of a rule on data with a binary treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenefitMetrics {
    /// Mean outcome where the rule recommends `+1` and `T = +1`, minus the
    /// mean where it recommends `+1` and `T = -1`. `None` when a cell is
    /// empty.
    pub delta_pos: Option<MeanDifference>,
    /// The same contrast among rows recommended `-1`, agreeing minus
    /// disagreeing.
    pub delta_neg: Option<MeanDifference>,
    /// Fraction of rows the rule assigns to `+1` and to `-1`.
    pub share_pos: f64,
    pub share_neg: f64,
    /// Cell sizes `[(+1, +1), (+1, -1), (-1, -1), (-1, +1)]` as
    /// `(rule, T)`.
    pub cells: [usize; 4],
}

fn mean_var(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, None);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(var))
}

fn difference(agree: &[f64], disagree: &[f64]) -> Option<MeanDifference> {
    if agree.is_empty() || disagree.is_empty() {
        return None;
    }
    let (m1, v1) = mean_var(agree);
    let (m2, v2) = mean_var(disagree);
    let std_error = match (v1, v2) {
        (Some(a), Some(b)) => Some(libm::sqrt(a / agree.len() as f64 + b / disagree.len() as f64)),
        _ => None,
    };
    Some(MeanDifference { estimate: m1 - m2, std_error })
}

/// `benefit_metrics` for the rule `sign(scores_i)`.
pub fn benefit_metrics(test: &Dataset, scores: &[f64]) -> Result<BenefitMetrics> {
    if !test.is_binary() {
        return Err(Error::NotBinary);
    }
    if scores.len() != test.n() {
        return Err(Error::DimensionMismatch("rule length differs from n".to_string()));
    }
    let mut groups: [Vec<f64>; 4] = Default::default();
    for (i, &s) in scores.iter().enumerate() {
        let (rule, t) = (sign(s), test.t()[i]);
        let cell = match (rule, t) {
            (1, 1) => 0,
            (1, _) => 1,
            (_, -1) => 2,
            _ => 3,
        };
        groups[cell].push(test.y()[i]);
    }
    let n = test.n() as f64;
    let cells = [groups[0].len(), groups[1].len(), groups[2].len(), groups[3].len()];
    Ok(BenefitMetrics {
        delta_pos: difference(&groups[0], &groups[1]),
        delta_neg: difference(&groups[2], &groups[3]),
        share_pos: (cells[0] + cells[1]) as f64 / n,
        share_neg: (cells[2] + cells[3]) as f64 / n,
        cells,
    })
}

/// Linear-interpolation quantile of a sample (`q` in `[0, 1]`).
pub fn quantile(v: &[f64], q: f64) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(s.len() - 1);
    Some(s[lo] + (pos - lo as f64) * (s[hi] - s[lo]))
}

/// Mean and root mean squared error against 1 of one coefficient ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    /// One-based coefficient `j` of `beta_j / beta_1`.
    pub ratio: usize,
    pub mean: f64,
    pub sqrt_mse: f64,
}

/// Column summaries of per-replicate ratio vectors.
pub fn summarize_ratios(rows: &[Vec<f64>]) -> Vec<RatioSummary> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|k| {
            let n = rows.len() as f64;
            let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let mse = rows.iter().map(|r| (r[k] - 1.0) * (r[k] - 1.0)).sum::<f64>() / n;
            RatioSummary { ratio: k + 2, mean, sqrt_mse: libm::sqrt(mse) }
        })
        .collect()
}

/// `beta_j / beta_1` for `j = 2..p` of a single-column index.
pub fn coefficient_ratios(b: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    (1..b.nrows()).map(|j| b[(j, 0)] / b[(0, 0)]).collect()
}

/// Evaluation of one set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub rank_statistic: RankStatistic,
    pub rank_correlation: Option<f64>,
    pub classification_rate: Option<f64>,
    pub ratios: Vec<RatioSummary>,
    pub benefit: Option<BenefitMetrics>,
}

impl MetricReport {
    /// Scores `pred` against the true contrast (when known) and, when a test
    /// dataset is supplied, the benefit of the rule `sign(pred)`.
    pub fn evaluate(pred: &[f64], truth: Option<&[f64]>, test: Option<&Dataset>, stat: RankStatistic) -> Result<Self> {
        let (rank_correlation, classification_rate) = match truth {
            Some(g) => (Some(rank_correlation_with(pred, g, stat)?), Some(classification_rate(pred, g)?)),
            None => (None, None),
        };
        let benefit = test.map(|ds| benefit_metrics(ds, pred)).transpose()?;
        Ok(MetricReport {
            n: pred.len(),
            rank_statistic: stat,
            rank_correlation,
            classification_rate,
            ratios: Vec::new(),
            benefit,
        })
    }
}
