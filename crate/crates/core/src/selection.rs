//! Five-fold cross-validation of the index dimension.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::efficiency::GEstimate;
use crate::error::{Error, Result};
use crate::fit::{imave_fit, EtaMode, FitConfig};
use crate::parallel::map_indexed;

/// Cross-validation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    /// Deal each treatment arm across the folds separately.
    pub stratified: bool,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 5, stratified: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// `CV(d)` for `d = 0..=d_max`.
    pub scores: Vec<f64>,
    /// `CV(d, m)` indexed by `[d][m]`.
    pub fold_scores: Vec<Vec<f64>>,
    pub chosen: usize,
    pub seed: u64,
    pub folds: usize,
    pub stratified: bool,
}

/// Random partition of `0..n` into `folds` index sets whose sizes differ by
/// at most one. Indices inside each fold are sorted.
pub fn fold_partition(ds: &Dataset, cv: &CvConfig) -> Result<Vec<Vec<usize>>> {
    if cv.folds < 2 || cv.folds > ds.n() {
        return Err(Error::InvalidConfig("folds must lie in [2, n]".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cv.seed);
    let mut order: Vec<usize> = Vec::with_capacity(ds.n());
    if cv.stratified {
        for level in 0..ds.k() {
            let mut arm: Vec<usize> = (0..ds.n()).filter(|&i| ds.level(i) == level).collect();
            arm.shuffle(&mut rng);
            order.extend(arm);
        }
    } else {
        order.extend(0..ds.n());
        order.shuffle(&mut rng);
    }
    let mut folds = vec![Vec::new(); cv.folds];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % cv.folds].push(i);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

fn weighted_outcomes(ds: &Dataset) -> Result<Vec<f64>> {
    let pi = ds.require_pi()?;
    Ok((0..ds.n()).map(|i| ds.t()[i] as f64 * ds.y()[i] / pi[i]).collect())
}

/// `CV(d, m)` for every fold `m`: the held-out mean of
/// `(T_i Y_i / (2 pi_i) - g_hat(B^T X_i) / 2)^2`, with `g_hat` fitted on the
/// remaining folds. `d = 0` predicts the training mean of `T Y / pi`.
pub fn cv_fold_scores(ds: &Dataset, d: usize, folds: &[Vec<usize>], cfg: &FitConfig) -> Result<Vec<f64>> {
    if !ds.is_binary() {
        return Err(Error::NotBinary);
    }
    if d > ds.p() {
        return Err(Error::InvalidDimension("d exceeds p".to_string()));
    }
    let w = weighted_outcomes(ds)?;
    let mut in_fold = vec![usize::MAX; ds.n()];
    for (m, fold) in folds.iter().enumerate() {
        if fold.is_empty() {
            return Err(Error::FoldDegenerate(m));
        }
        for &i in fold {
            in_fold[i] = m;
        }
    }
    if in_fold.contains(&usize::MAX) {
        return Err(Error::InvalidConfig("folds do not cover every observation".to_string()));
    }
    for (m, fold) in folds.iter().enumerate() {
        let train: Vec<usize> = (0..ds.n()).filter(|&i| in_fold[i] != m).collect();
        let arms = |idx: &[usize]| idx.iter().map(|&i| ds.level(i)).collect::<alloc::collections::BTreeSet<_>>().len();
        if arms(fold) < ds.k() || arms(&train) < ds.k() {
            return Err(Error::FoldDegenerate(m));
        }
    }
    let scores = map_indexed(folds.len(), |m| -> Result<f64> {
        let test = &folds[m];
        let train: Vec<usize> = (0..ds.n()).filter(|&i| in_fold[i] != m).collect();
        let predictions: Vec<f64> = if d == 0 {
            let mean = train.iter().map(|&i| w[i]).sum::<f64>() / train.len() as f64;
            vec![mean; test.len()]
        } else {
            let train_ds = ds.subset(&train)?;
            let fit = imave_fit(&train_ds, d, EtaMode::Zero, cfg)?;
            let ghat = GEstimate::new(&train_ds, &fit.b, cfg.smoother.kernel, cfg.smoother.h_g)?;
            let rows: Vec<f64> = test.iter().flat_map(|&i| ds.row(i).iter().copied()).collect();
            ghat.predict_rows(&rows)?.into_iter().map(|s| s.value()).collect()
        };
        let sum: f64 =
            test.iter().zip(&predictions).map(|(&i, g)| (0.5 * w[i] - 0.5 * g) * (0.5 * w[i] - 0.5 * g)).sum();
        Ok(sum / test.len() as f64)
    });
    scores.into_iter().collect()
}

/// `CV(d)`: the mean of the fold scores.
pub fn cv_score(ds: &Dataset, d: usize, folds: &[Vec<usize>], cfg: &FitConfig) -> Result<f64> {
    let s = cv_fold_scores(ds, d, folds, cfg)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// Default largest candidate dimension, `min(p, 4)`.
pub fn default_max_dimension(p: usize) -> usize {
    p.min(4)
}

/// `select_dimension`: `CV(d)` for `d = 0..=d_max` on one shared partition;
/// the smallest minimizer wins.
pub fn select_dimension(ds: &Dataset, d_max: usize, cv: &CvConfig, cfg: &FitConfig) -> Result<CvResult> {
    if d_max > ds.p() {
        return Err(Error::InvalidDimension("d_max exceeds p".to_string()));
    }
    if ds.n() < 10 {
        return Err(Error::InvalidConfig("cross-validation needs n >= 10".to_string()));
    }
    let folds = fold_partition(ds, cv)?;
    let fold_scores: Vec<Vec<f64>> = (0..=d_max).map(|d| cv_fold_scores(ds, d, &folds, cfg)).collect::<Result<_>>()?;
    let scores: Vec<f64> = fold_scores.iter().map(|s| s.iter().sum::<f64>() / s.len() as f64).collect();
    let mut chosen = 0;
    for (d, &s) in scores.iter().enumerate() {
        if s < scores[chosen] {
            chosen = d;
        }
    }
    Ok(CvResult { scores, fold_scores, chosen, seed: cv.seed, folds: cv.folds, stratified: cv.stratified })
}
