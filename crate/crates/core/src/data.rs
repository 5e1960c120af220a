//! Datasets, treatment coding, propensities and contrast weights.
//!
//! Binary treatments are stored as `{-1, +1}`; `K`-level treatments as
//! `1..=K`. Internally every observation is mapped to a zero-based *level
//! index*: `+1 -> 0`, `-1 -> 1` in the binary case, `t -> t - 1` otherwise, so
//! that column `0` of the default contrast `(1, -1)` belongs to `T = +1`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, solve_gram};

/// Default clipping applied to predicted propensities.
pub const DEFAULT_PROPENSITY_CLIP: f64 = 0.01;

/// Untyped input table, as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub y: Vec<f64>,
    /// Treatment labels as written in the source.
    pub t: Vec<String>,
    pub pi: Option<Vec<f64>>,
    /// Covariate rows, each of length `p`.
    pub x: Vec<Vec<f64>>,
    /// Optional declared treatment levels; when present every label must be
    /// one of them and every declared level must be observed.
    pub levels: Option<Vec<String>>,
}

/// Validated observational or randomized data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    /// Row-major `n x p` covariates.
    x: Vec<f64>,
    y: Vec<f64>,
    t: Vec<i32>,
    pi: Option<Vec<f64>>,
    k: usize,
    /// Source label for each level index.
    labels: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from already-coded treatments.
    ///
    /// `t` must be coded `{-1, +1}` when `k == 2` and `1..=k` otherwise.
    pub fn new(
        x: Vec<f64>,
        n: usize,
        p: usize,
        y: Vec<f64>,
        t: Vec<i32>,
        k: usize,
        pi: Option<Vec<f64>>,
    ) -> Result<Self> {
        let labels =
            if k == 2 { vec!["1".to_string(), "-1".to_string()] } else { (1..=k).map(|l| l.to_string()).collect() };
        let ds = Dataset { n, p, x, y, t, pi, k, labels };
        ds.check()?;
        Ok(ds)
    }

    fn check(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidDimension(format!("need at least 2 rows, got {}", self.n)));
        }
        if self.p < 1 {
            return Err(Error::InvalidDimension("need at least one covariate".into()));
        }
        if self.x.len() != self.n * self.p || self.y.len() != self.n || self.t.len() != self.n {
            return Err(Error::DimensionMismatch("dataset columns have inconsistent lengths".into()));
        }
        if self.k < 2 {
            return Err(Error::DegenerateTreatment("fewer than two treatment levels".into()));
        }
        if let Some(i) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("x at row {}", i / self.p)));
        }
        if let Some(i) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("y at row {i}")));
        }
        let mut seen = vec![false; self.k];
        for &t in &self.t {
            let idx = level_index(t, self.k).ok_or_else(|| Error::UnknownTreatmentLevel(t.to_string()))?;
            seen[idx] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::DegenerateTreatment("a treatment level has no observations".into()));
        }
        if let Some(pi) = &self.pi {
            if pi.len() != self.n {
                return Err(Error::DimensionMismatch("propensity column length".into()));
            }
            for (row, &value) in pi.iter().enumerate() {
                if !(value > 0.0 && value < 1.0) {
                    return Err(Error::PropensityOutOfRange { row, value });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of treatment levels.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_binary(&self) -> bool {
        self.k == 2
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Row-major covariate storage.
    pub fn x_rows(&self) -> &[f64] {
        &self.x
    }

    pub fn x_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.x)
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t(&self) -> &[i32] {
        &self.t
    }

    pub fn pi(&self) -> Option<&[f64]> {
        self.pi.as_deref()
    }

    /// Propensities, or [`Error::MissingPropensity`].
    pub fn require_pi(&self) -> Result<&[f64]> {
        self.pi.as_deref().ok_or(Error::MissingPropensity)
    }

    /// Zero-based level index of observation `i`.
    pub fn level(&self, i: usize) -> usize {
        level_index(self.t[i], self.k).expect("validated treatment")
    }

    /// `P(T = +1 | X_i)` implied by the stored propensity of the observed arm.
    pub fn prob_positive(&self, i: usize) -> Result<f64> {
        if !self.is_binary() {
            return Err(Error::NotBinary);
        }
        let pi = self.require_pi()?[i];
        Ok(if self.t[i] == 1 { pi } else { 1.0 - pi })
    }

    /// Source labels indexed by level index.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Treatment labels in their original spelling.
    pub fn decode_treatments(&self) -> Vec<String> {
        (0..self.n).map(|i| self.labels[self.level(i)].clone()).collect()
    }

    /// Inverse of [`validate_dataset`].
    pub fn to_raw(&self) -> RawTable {
        RawTable {
            y: self.y.clone(),
            t: self.decode_treatments(),
            pi: self.pi.clone(),
            x: (0..self.n).map(|i| self.row(i).to_vec()).collect(),
            levels: Some(self.labels.clone()),
        }
    }

    /// Copy with the propensity column replaced.
    pub fn with_pi(&self, pi: Vec<f64>) -> Result<Self> {
        let mut out = self.clone();
        out.pi = Some(pi);
        out.check()?;
        Ok(out)
    }

    /// Copy whose propensities are predicted by `model`.
    pub fn with_propensity(&self, model: &PropensityModel) -> Result<Self> {
        if matches!(model.kind, PropensityKind::Known) {
            self.require_pi()?;
            return Ok(self.clone());
        }
        if !self.is_binary() {
            return Err(Error::NotBinary);
        }
        let pi = (0..self.n)
            .map(|i| {
                let pos = model.prob_positive(self.row(i));
                if self.t[i] == 1 {
                    pos
                } else {
                    1.0 - pos
                }
            })
            .collect();
        self.with_pi(pi)
    }

    /// Rows `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let mut x = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        let out = Dataset {
            n: idx.len(),
            p: self.p,
            x,
            y: idx.iter().map(|&i| self.y[i]).collect(),
            t: idx.iter().map(|&i| self.t[i]).collect(),
            pi: self.pi.as_ref().map(|pi| idx.iter().map(|&i| pi[i]).collect()),
            k: self.k,
            labels: self.labels.clone(),
        };
        out.check()?;
        Ok(out)
    }

    /// Column-centred, unit-variance copy together with the column means and
    /// standard deviations used. Constant columns are only centred.
    pub fn standardized(&self) -> (Self, Vec<f64>, Vec<f64>) {
        let mut means = vec![0.0; self.p];
        let mut sds = vec![1.0; self.p];
        for c in 0..self.p {
            let col = (0..self.n).map(|i| self.x[i * self.p + c]);
            means[c] = col.clone().sum::<f64>() / self.n as f64;
            let sd = linalg::std_dev(col);
            if sd > 0.0 {
                sds[c] = sd;
            }
        }
        let mut out = self.clone();
        for i in 0..self.n {
            for c in 0..self.p {
                let v = &mut out.x[i * self.p + c];
                *v = (*v - means[c]) / sds[c];
            }
        }
        (out, means, sds)
    }
}

fn level_index(t: i32, k: usize) -> Option<usize> {
    if k == 2 {
        match t {
            1 => Some(0),
            -1 => Some(1),
            _ => None,
        }
    } else if t >= 1 && (t as usize) <= k {
        Some(t as usize - 1)
    } else {
        None
    }
}

/// Validates a raw table and recodes its treatment labels.
///
/// Two-level treatments become `{-1, +1}`: labels `{-1, 1}` keep their
/// value, `{0, 1}` maps `1 -> +1`, and any other pair maps the first label in
/// sorted order to `+1`. More levels become `1..=K` in sorted label order
/// (numeric order when every label parses as a number). A declared level
/// list fixes the order instead.
pub fn validate_dataset(raw: &RawTable) -> Result<Dataset> {
    let n = raw.y.len();
    if n < 2 {
        return Err(Error::InvalidDimension(format!("need at least 2 rows, got {n}")));
    }
    if raw.t.len() != n || raw.x.len() != n {
        return Err(Error::DimensionMismatch("columns have different lengths".into()));
    }
    let p = raw.x[0].len();
    if raw.x.iter().any(|r| r.len() != p) {
        return Err(Error::DimensionMismatch("ragged covariate rows".into()));
    }
    let labels: Vec<String> = match &raw.levels {
        Some(levels) => {
            for l in &raw.t {
                if !levels.contains(l) {
                    return Err(Error::UnknownTreatmentLevel(l.clone()));
                }
            }
            levels.clone()
        }
        None => {
            let mut uniq: Vec<String> = raw.t.clone();
            sort_labels(&mut uniq);
            uniq.dedup();
            uniq
        }
    };
    if labels.len() < 2 {
        return Err(Error::DegenerateTreatment(format!("only level(s) {labels:?} present")));
    }
    let k = labels.len();
    let labels = if k == 2 && raw.levels.is_none() { binary_order(labels) } else { labels };
    let code = |l: &String| -> i32 {
        let idx = labels.iter().position(|x| x == l).expect("label in level set");
        if k == 2 {
            if idx == 0 {
                1
            } else {
                -1
            }
        } else {
            idx as i32 + 1
        }
    };
    let t: Vec<i32> = raw.t.iter().map(code).collect();
    let x: Vec<f64> = raw.x.iter().flatten().copied().collect();
    let ds = Dataset { n, p, x, y: raw.y.clone(), t, pi: raw.pi.clone(), k, labels };
    ds.check()?;
    Ok(ds)
}

fn parse_label(l: &str) -> Option<f64> {
    l.trim().parse::<f64>().ok()
}

fn sort_labels(labels: &mut [String]) {
    if labels.iter().all(|l| parse_label(l).is_some()) {
        labels.sort_by(|a, b| parse_label(a).unwrap().total_cmp(&parse_label(b).unwrap()));
    } else {
        labels.sort();
    }
}

/// Orders a sorted two-label set so that index 0 is the `+1` arm.
fn binary_order(sorted: Vec<String>) -> Vec<String> {
    let vals: Vec<Option<f64>> = sorted.iter().map(|l| parse_label(l)).collect();
    match (vals[0], vals[1]) {
        (Some(a), Some(b)) if (a == -1.0 && b == 1.0) || (a == 0.0 && b == 1.0) => {
            vec![sorted[1].clone(), sorted[0].clone()]
        }
        _ => sorted,
    }
}

/// The `(K-1) x K` contrast matrix `Omega`. Serializes as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ContrastSpec {
    omega: DMatrix<f64>,
    /// `(Omega Omega^T)^{-1} Omega_{.t}` for every level `t`.
    coefficients: Vec<DVector<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for ContrastSpec {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if m == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidContrast("ragged or empty matrix".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::new(DMatrix::from_row_slice(m, k, &flat))
    }
}

impl From<ContrastSpec> for Vec<Vec<f64>> {
    fn from(spec: ContrastSpec) -> Self {
        spec.omega.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

impl ContrastSpec {
    pub fn new(omega: DMatrix<f64>) -> Result<Self> {
        let (m, k) = omega.shape();
        if k < 2 || m + 1 != k {
            return Err(Error::InvalidContrast(format!("expected (K-1) x K, got {m} x {k}")));
        }
        if omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidContrast("non-finite entry".into()));
        }
        for r in 0..m {
            if omega.row(r).sum().abs() > 1e-12 {
                return Err(Error::InvalidContrast(format!("row {r} does not sum to zero")));
            }
        }
        let gram = &omega * omega.transpose();
        let sv = omega.clone().svd(false, false).singular_values;
        if sv.min() <= 1e-10 {
            return Err(Error::InvalidContrast("Omega Omega^T is singular".into()));
        }
        let inv = gram.try_inverse().ok_or_else(|| Error::InvalidContrast("Omega Omega^T is singular".into()))?;
        let coefficients = (0..k).map(|t| &inv * omega.column(t)).collect();
        Ok(ContrastSpec { omega, coefficients })
    }

    /// `Omega = (1, -1)`.
    pub fn binary() -> Self {
        Self::new(DMatrix::from_row_slice(1, 2, &[1.0, -1.0])).expect("valid binary contrast")
    }

    /// Successive differences `E[Y|t] - E[Y|t+1]`.
    pub fn successive_differences(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidContrast("K must be at least 2".into()));
        }
        let mut omega = DMatrix::zeros(k - 1, k);
        for r in 0..k - 1 {
            omega[(r, r)] = 1.0;
            omega[(r, r + 1)] = -1.0;
        }
        Self::new(omega)
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    /// Number of treatment levels `K`.
    pub fn levels(&self) -> usize {
        self.omega.ncols()
    }

    /// Number of contrasts `K - 1`.
    pub fn contrasts(&self) -> usize {
        self.omega.nrows()
    }

    /// `(Omega Omega^T)^{-1} Omega_{.t}` for zero-based level index `t`; the
    /// fitted mean of level `t` is this vector dotted with `g`.
    pub fn level_coefficients(&self, t: usize) -> &DVector<f64> {
        &self.coefficients[t]
    }
}

/// `Omega_{.t} / pi_t` for the one-based level `t`.
pub fn contrast_weights(spec: &ContrastSpec, t: usize, pi_t: f64) -> Result<DVector<f64>> {
    if t == 0 || t > spec.levels() {
        return Err(Error::InvalidLevel(t));
    }
    if !(pi_t > 0.0 && pi_t < 1.0) {
        return Err(Error::PropensityOutOfRange { row: 0, value: pi_t });
    }
    Ok(spec.omega.column(t - 1) / pi_t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PropensityKind {
    /// Propensities are supplied with the data.
    Known,
    /// `P(T = +1 | X) = value`.
    Constant(f64),
    /// `P(T = +1 | X) = logistic(c0 + c^T x)`, coefficients `[c0, c1..cp]`.
    Logistic(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub kind: PropensityKind,
    pub clip: f64,
}

impl PropensityModel {
    pub fn known() -> Self {
        PropensityModel { kind: PropensityKind::Known, clip: DEFAULT_PROPENSITY_CLIP }
    }

    /// Clipped `P(T = +1 | x)`. `Known` models have no formula and return
    /// `NaN`.
    pub fn prob_positive(&self, x: &[f64]) -> f64 {
        let raw = match &self.kind {
            PropensityKind::Known => return f64::NAN,
            PropensityKind::Constant(v) => *v,
            PropensityKind::Logistic(c) => {
                let eta = c[0] + c[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                logistic(eta)
            }
        };
        raw.clamp(self.clip, 1.0 - self.clip)
    }
}

pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + libm::exp(-eta))
    } else {
        let e = libm::exp(eta);
        e / (1.0 + e)
    }
}

/// Coefficient norm beyond which the logistic fit is declared separated.
pub const SEPARATION_NORM: f64 = 1e3;
const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityEstimate {
    pub model: PropensityModel,
    /// The maximum-likelihood fit diverged; `model` is the constant fallback.
    pub separation_detected: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// One Newton / iteratively reweighted least-squares update for logistic
/// regression.
///
/// `design` is row-major `n x q` (intercept column included by the caller),
/// `y` holds 0/1 responses. Returns the weighted least-squares solution for
/// the working response `z = design * beta + (y - mu) / (mu (1 - mu))` with
/// weights `mu (1 - mu)`.
pub fn irls_step(design: &[f64], q: usize, y: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    if design.len() != n * q || beta.len() != q {
        return Err(Error::DimensionMismatch("irls design".into()));
    }
    let mut gram = DMatrix::<f64>::zeros(q, q);
    let mut rhs = DVector::<f64>::zeros(q);
    for i in 0..n {
        let row = &design[i * q..(i + 1) * q];
        let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        let mu = logistic(eta);
        let w = (mu * (1.0 - mu)).max(1e-300);
        let z = eta + (y[i] - mu) / w;
        for a in 0..q {
            rhs[a] += w * row[a] * z;
            for b in 0..=a {
                gram[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    Ok(solve_gram(&gram, &rhs, 1e-8)?.coefficients.iter().copied().collect())
}

/// Fits `P(T = +1 | X)` by maximum likelihood.
pub fn estimate_propensity(ds: &Dataset) -> Result<PropensityEstimate> {
    if !ds.is_binary() {
        return Err(Error::NotBinary);
    }
    let (n, p) = (ds.n(), ds.p());
    let q = p + 1;
    let mut design = Vec::with_capacity(n * q);
    for i in 0..n {
        design.push(1.0);
        design.extend_from_slice(ds.row(i));
    }
    let y: Vec<f64> = ds.t().iter().map(|&t| if t == 1 { 1.0 } else { 0.0 }).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let fallback = |iterations| PropensityEstimate {
        model: PropensityModel { kind: PropensityKind::Constant(mean), clip: DEFAULT_PROPENSITY_CLIP },
        separation_detected: true,
        iterations,
        converged: false,
    };
    let mut beta = vec![0.0; q];
    for it in 1..=IRLS_MAX_ITER {
        let next = match irls_step(&design, q, &y, &beta) {
            Ok(b) => b,
            Err(_) => return Ok(fallback(it)),
        };
        let norm = libm::sqrt(next.iter().map(|v| v * v).sum::<f64>());
        if !norm.is_finite() || norm > SEPARATION_NORM {
            return Ok(fallback(it));
        }
        let change = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = next;
        if change < IRLS_TOL {
            return Ok(PropensityEstimate {
                model: PropensityModel { kind: PropensityKind::Logistic(beta), clip: DEFAULT_PROPENSITY_CLIP },
                separation_detected: false,
                iterations: it,
                converged: true,
            });
        }
    }
    // Newton iterates on separable data grow without bound but may stay below
    // the norm threshold within the iteration budget.
    Ok(fallback(IRLS_MAX_ITER))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(t: &[&str]) -> RawTable {
        RawTable {
            y: (0..t.len()).map(|i| i as f64).collect(),
            t: t.iter().map(|s| s.to_string()).collect(),
            pi: None,
            x: (0..t.len()).map(|i| vec![i as f64, 1.0]).collect(),
            levels: None,
        }
    }

    #[test]
    fn two_labels_become_plus_minus_one() {
        let ds = validate_dataset(&raw(&["A", "B", "B", "A"])).unwrap();
        assert_eq!(ds.k(), 2);
        assert_eq!(ds.t(), &[1, -1, -1, 1]);
        let ds = validate_dataset(&raw(&["0", "1", "1", "0"])).unwrap();
        assert_eq!(ds.t(), &[-1, 1, 1, -1]);
        let ds = validate_dataset(&raw(&["-1", "1", "1", "-1"])).unwrap();
        assert_eq!(ds.t(), &[-1, 1, 1, -1]);
    }

    #[test]
    fn nan_covariate_is_rejected() {
        let mut r = raw(&["A", "B", "B", "A"]);
        r.x[2][1] = f64::NAN;
        assert_eq!(validate_dataset(&r).unwrap_err().code(), "NonFiniteValue");
    }

    #[test]
    fn single_arm_is_degenerate() {
        let r = raw(&["1", "1", "1", "1"]);
        assert_eq!(validate_dataset(&r).unwrap_err().code(), "DegenerateTreatment");
    }

    #[test]
    fn undeclared_label_is_unknown() {
        let mut r = raw(&["A", "B", "C", "A"]);
        r.levels = Some(vec!["A".into(), "B".into()]);
        assert_eq!(validate_dataset(&r).unwrap_err().code(), "UnknownTreatmentLevel");
    }

    #[test]
    fn propensity_out_of_range() {
        let mut r = raw(&["A", "B", "B", "A"]);
        r.pi = Some(vec![0.5, 0.5, 1.0, 0.5]);
        assert_eq!(validate_dataset(&r).unwrap_err().code(), "PropensityOutOfRange");
    }

    #[test]
    fn multi_level_labels_sort_numerically() {
        let ds = validate_dataset(&raw(&["10", "2", "3", "2"])).unwrap();
        assert_eq!(ds.k(), 3);
        assert_eq!(ds.t(), &[3, 1, 2, 1]);
    }

    #[test]
    fn recoding_round_trips() {
        for labels in [["A", "B", "B", "A"], ["0", "1", "0", "1"], ["x", "y", "z", "x"]] {
            let ds = validate_dataset(&raw(&labels)).unwrap();
            let again = validate_dataset(&ds.to_raw()).unwrap();
            assert_eq!(ds, again);
            assert_eq!(ds.decode_treatments(), labels.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn contrast_weight_examples() {
        let b = ContrastSpec::binary();
        assert_eq!(contrast_weights(&b, 1, 0.5).unwrap().as_slice(), &[2.0]);
        assert_eq!(contrast_weights(&b, 2, 0.5).unwrap().as_slice(), &[-2.0]);
        let omega = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, -0.5, -0.5, 1.0]);
        let s = ContrastSpec::new(omega).unwrap();
        assert_eq!(contrast_weights(&s, 3, 0.25).unwrap().as_slice(), &[0.0, 4.0]);
        assert_eq!(contrast_weights(&s, 4, 0.25).unwrap_err(), Error::InvalidLevel(4));
    }

    #[test]
    fn binary_level_coefficients_are_half_t() {
        let b = ContrastSpec::binary();
        assert_eq!(b.level_coefficients(0)[0], 0.5);
        assert_eq!(b.level_coefficients(1)[0], -0.5);
    }

    #[test]
    fn contrast_rows_must_sum_to_zero() {
        let bad = DMatrix::from_row_slice(1, 2, &[1.0, -0.5]);
        assert_eq!(ContrastSpec::new(bad).unwrap_err().code(), "InvalidContrast");
        let singular = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 2.0, -2.0, 0.0]);
        assert_eq!(ContrastSpec::new(singular).unwrap_err().code(), "InvalidContrast");
    }

    #[test]
    fn separated_data_falls_back_to_constant() {
        let n = 40;
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 19.5).collect();
        let t: Vec<i32> = x.iter().map(|v| if *v > 0.0 { 1 } else { -1 }).collect();
        let ds = Dataset::new(x, n, 1, vec![0.0; n], t, 2, None).unwrap();
        let est = estimate_propensity(&ds).unwrap();
        assert!(est.separation_detected);
        assert_eq!(est.model.kind, PropensityKind::Constant(0.5));
    }

    #[test]
    fn propensity_requires_binary() {
        let ds = validate_dataset(&raw(&["a", "b", "c", "a"])).unwrap();
        assert_eq!(estimate_propensity(&ds).unwrap_err(), Error::NotBinary);
    }

    #[test]
    fn predictions_are_clipped() {
        let m = PropensityModel { kind: PropensityKind::Logistic(vec![50.0, 0.0]), clip: 0.01 };
        assert_eq!(m.prob_positive(&[0.0]), 0.99);
        let m = PropensityModel { kind: PropensityKind::Logistic(vec![-50.0, 0.0]), clip: 0.01 };
        assert_eq!(m.prob_positive(&[0.0]), 0.01);
    }
}
