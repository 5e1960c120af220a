//! The iMAVE estimator: kernel-weighted local linear fits alternated with a
//! global weighted least-squares update of the index matrix.
//!
//! One engine serves both the binary and the `K`-level model. Observation
//! `i` enters every least-squares problem through the level coefficient
//! vector `v_t = (Omega Omega^T)^{-1} Omega_{.t}` of its treatment `t`; with
//! `Omega = (1, -1)` this is `v_t = T_i / 2`, and the local model
//! `v_t^T [a_j + b_j B^T (X_i - X_j)]` is the familiar
//! `T_i / 2 [a_j + b_j^T B^T (X_i - X_j)]`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{ContrastSpec, Dataset};
use crate::error::{Error, Result};
use crate::index::{grassmann_normalize, normalize_or_complete, IndexMatrix};
use crate::kernel::{BandwidthSchedule, KernelFamily, KernelSpec, ScaledKernel, RULE_OF_THUMB};
use crate::linalg::{leading_eigenvectors, solve_gram, std_dev};
use crate::parallel::map_chunks;

/// Default relative ridge applied to near-singular Gram matrices.
pub const DEFAULT_RIDGE: f64 = 1e-8;
const INITIAL_ALTERNATIONS: usize = 5;
const CHUNK: usize = 32;

/// Offset `eta(X)` subtracted from the outcome in every loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "values", rename_all = "snake_case")]
pub enum EtaMode {
    Zero,
    /// `(1 - 2 pi(X)) g(B^T X)` with `g` replaced by the current local fits.
    SongPi,
    Fixed(Vec<f64>),
    /// A smoothed estimate of `E[eps | X]` at the sample points.
    EstimatedStar(Vec<f64>),
}

impl EtaMode {
    pub fn name(&self) -> &'static str {
        match self {
            EtaMode::Zero => "zero",
            EtaMode::SongPi => "song_pi",
            EtaMode::Fixed(_) => "fixed",
            EtaMode::EstimatedStar(_) => "estimated_star",
        }
    }

    /// Offsets at the sample points before any local fit exists. `SongPi`
    /// starts from zero.
    pub fn offsets(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            EtaMode::Zero | EtaMode::SongPi => Ok(vec![0.0; n]),
            EtaMode::Fixed(v) | EtaMode::EstimatedStar(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch("eta length differs from n".to_string()));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteValue("eta".to_string()));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Local value `a_j` and gradient `b_j` of the contrast at anchor `j`.
///
/// For `K` levels `a` has `K - 1` entries and `b` is `(K - 1) x d`; in the
/// binary case they are a scalar and a gradient row.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub a: DVector<f64>,
    pub b: DMatrix<f64>,
    /// The Gram matrix needed the ridge term.
    pub degenerate: bool,
}

impl LocalFit {
    /// `a_j` of the first contrast.
    pub fn value(&self) -> f64 {
        self.a[0]
    }

    /// `b_j` of the first contrast.
    pub fn gradient(&self) -> DVector<f64> {
        self.b.row(0).transpose()
    }
}

/// Optional overrides for the bandwidth schedule; `None` selects the
/// rule-of-thumb default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub c1: Option<f64>,
    pub c3: Option<f64>,
    pub rh: Option<f64>,
    pub rh_prime: Option<f64>,
}

/// Kernel smoothers used by iMAVE2 and cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub kernel: KernelFamily,
    /// Bandwidth of the `d`-dimensional smoother for `g`.
    pub h_g: Option<f64>,
    /// Bandwidth of the `p`-dimensional smoother for `E[eps | X]`.
    pub h_eta: Option<f64>,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig { kernel: KernelFamily::Epanechnikov, h_g: None, h_eta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Frobenius tolerance on successive normalized iterates.
    pub tol: f64,
    pub kernel: KernelFamily,
    pub bandwidth: BandwidthConfig,
    pub ridge: f64,
    pub seed: u64,
    pub smoother: SmootherConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 50,
            tol: 1e-6,
            kernel: KernelFamily::Epanechnikov,
            bandwidth: BandwidthConfig::default(),
            ridge: DEFAULT_RIDGE,
            seed: 0,
            smoother: SmootherConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".to_string()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".to_string()));
        }
        if !(self.ridge > 0.0) {
            return Err(Error::InvalidConfig("ridge must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub b: IndexMatrix,
    pub eta: EtaMode,
    /// `L_2` at the unnormalized minimizer of every iteration.
    pub loss_trace: Vec<f64>,
    pub h_trace: Vec<f64>,
    /// Local fits at the final index matrix, one per sample point.
    pub local_fits: Vec<LocalFit>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub schedule: BandwidthSchedule,
    /// Anchors whose final local fit needed the ridge term.
    pub degenerate_fits: usize,
}

impl FitResult {
    pub fn d(&self) -> usize {
        self.b.d()
    }
}

/// Treatment structure and data of one fit, flattened for the inner loops.
pub(crate) struct Problem<'a> {
    pub n: usize,
    pub p: usize,
    /// Number of contrasts `K - 1`.
    pub m: usize,
    pub x: &'a [f64],
    pub level: Vec<usize>,
    pub coef: Vec<Vec<f64>>,
    pub inv_pi: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(ds: &'a Dataset, spec: &ContrastSpec) -> Result<Self> {
        if spec.levels() != ds.k() {
            return Err(Error::InvalidContrast("contrast matrix does not match the number of levels".to_string()));
        }
        let pi = ds.require_pi()?;
        Ok(Problem {
            n: ds.n(),
            p: ds.p(),
            m: spec.contrasts(),
            x: ds.x_rows(),
            level: (0..ds.n()).map(|i| ds.level(i)).collect(),
            coef: (0..spec.levels()).map(|t| spec.level_coefficients(t).iter().copied().collect()).collect(),
            inv_pi: pi.iter().map(|v| 1.0 / v).collect(),
        })
    }

    fn levels(&self) -> usize {
        self.coef.len()
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    fn mean_column_sd(&self) -> f64 {
        let sd: f64 =
            (0..self.p).map(|c| std_dev((0..self.n).map(|i| self.x[i * self.p + c]))).sum::<f64>() / self.p as f64;
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    }
}

fn projected_sd(u: &[f64], n: usize, d: usize) -> f64 {
    let sd = (0..d).map(|k| std_dev((0..n).map(|i| u[i * d + k]))).sum::<f64>() / d as f64;
    if sd > 0.0 {
        sd
    } else {
        1.0
    }
}

fn check_dimension(d: usize, p: usize) -> Result<()> {
    if d < 1 || d > p {
        return Err(Error::InvalidDimension(alloc::format!("d = {d} must satisfy 1 <= d <= p = {p}")));
    }
    Ok(())
}

/// Kernel-weighted neighbours `(i, K_h(u_i - u_j))` of anchor `j`, weights
/// positive only.
fn neighbours(u: &[f64], n: usize, d: usize, j: usize, kernel: &ScaledKernel, out: &mut Vec<(usize, f64)>) {
    out.clear();
    let uj = &u[j * d..(j + 1) * d];
    for i in 0..n {
        let ui = &u[i * d..(i + 1) * d];
        let r2: f64 = ui.iter().zip(uj).map(|(a, b)| (a - b) * (a - b)).sum();
        let w = kernel.at_sq(r2);
        if w > 0.0 {
            out.push((i, w));
        }
    }
}

/// Minimizes `sum_i w_i / pi_i (r_i - v_{t_i}^T [a + b (u_i - u_j)])^2`.
fn local_solve(
    prob: &Problem,
    u: &[f64],
    d: usize,
    j: usize,
    nb: &[(usize, f64)],
    resp: &[f64],
    ridge: f64,
) -> Result<LocalFit> {
    let m = prob.m;
    let s = 1 + d;
    let q = m * s;
    let mut gram = DMatrix::<f64>::zeros(q, q);
    let mut rhs = DVector::<f64>::zeros(q);
    let mut row = vec![0.0; q];
    let mut xi = vec![0.0; s];
    let uj = &u[j * d..(j + 1) * d];
    let mut total = 0.0;
    for &(i, w) in nb {
        let omega = w * prob.inv_pi[i];
        total += omega;
        xi[0] = 1.0;
        for l in 0..d {
            xi[1 + l] = u[i * d + l] - uj[l];
        }
        let v = &prob.coef[prob.level[i]];
        for k in 0..m {
            for l in 0..s {
                row[k * s + l] = v[k] * xi[l];
            }
        }
        let r = resp[i];
        for a in 0..q {
            let ra = omega * row[a];
            rhs[a] += ra * r;
            for b in a..q {
                gram[(a, b)] += ra * row[b];
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::AllWeightsZero(j));
    }
    for a in 0..q {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let sol = solve_gram(&gram, &rhs, ridge)?;
    let theta = sol.coefficients;
    let a = DVector::from_iterator(m, (0..m).map(|k| theta[k * s]));
    let b = DMatrix::from_fn(m, d, |k, l| theta[k * s + 1 + l]);
    Ok(LocalFit { a, b, degenerate: sol.regularized })
}

/// Step-4 normal equations accumulated over a set of anchors.
struct Step4 {
    gram: Vec<f64>,
    rhs: Vec<f64>,
    /// `sum w / pi * residual^2` at the current local fits.
    c0: f64,
}

impl Step4 {
    fn zeros(dim: usize) -> Self {
        Step4 { gram: vec![0.0; dim * dim], rhs: vec![0.0; dim], c0: 0.0 }
    }

    fn add(&mut self, other: &Step4) {
        for (a, b) in self.gram.iter_mut().zip(&other.gram) {
            *a += b;
        }
        for (a, b) in self.rhs.iter_mut().zip(&other.rhs) {
            *a += b;
        }
        self.c0 += other.c0;
    }

    /// `c0 - 2 rhs^T theta + theta^T gram theta`.
    fn quadratic(&self, theta: &[f64]) -> f64 {
        let dim = self.rhs.len();
        let mut quad = 0.0;
        for a in 0..dim {
            let mut ga = 0.0;
            for b in 0..dim {
                ga += self.gram[a * dim + b] * theta[b];
            }
            quad += theta[a] * ga;
        }
        let lin: f64 = self.rhs.iter().zip(theta).map(|(r, t)| r * t).sum();
        self.c0 - 2.0 * lin + quad
    }
}

/// Adds anchor `j`'s contribution to the step-4 system for `vec(B)` (columns
/// stacked). The design row of pair `(i, j)` is `beta_{jt} (x) (X_i - X_j)`
/// with `beta_{jt} = b_j^T v_t`, so the Gram contribution factors into
/// `(beta beta^T) (x) M_{jt}` per level.
fn accumulate_step4(
    prob: &Problem,
    d: usize,
    j: usize,
    nb: &[(usize, f64)],
    resp: &[f64],
    fit: &LocalFit,
    acc: &mut Step4,
) {
    let p = prob.p;
    let levels = prob.levels();
    let dim = p * d;
    let mut mats = vec![0.0; levels * p * p];
    let mut vecs = vec![0.0; levels * p];
    let offsets: Vec<f64> =
        (0..levels).map(|t| prob.coef[t].iter().zip(fit.a.iter()).map(|(v, a)| v * a).sum()).collect();
    let betas: Vec<f64> = (0..levels)
        .flat_map(|t| {
            let v = &prob.coef[t];
            (0..d).map(move |l| (0..prob.m).map(|k| fit.b[(k, l)] * v[k]).sum::<f64>())
        })
        .collect();
    let xj = prob.row(j);
    let mut z = vec![0.0; p];
    for &(i, w) in nb {
        let omega = w * prob.inv_pi[i];
        let t = prob.level[i];
        let r = resp[i] - offsets[t];
        acc.c0 += omega * r * r;
        let xi = prob.row(i);
        for l in 0..p {
            z[l] = xi[l] - xj[l];
        }
        let mt = &mut mats[t * p * p..(t + 1) * p * p];
        for a in 0..p {
            let za = omega * z[a];
            for b in a..p {
                mt[a * p + b] += za * z[b];
            }
        }
        let vt = &mut vecs[t * p..(t + 1) * p];
        for a in 0..p {
            vt[a] += omega * r * z[a];
        }
    }
    for t in 0..levels {
        let mt = &mut mats[t * p * p..(t + 1) * p * p];
        for a in 0..p {
            for b in 0..a {
                mt[a * p + b] = mt[b * p + a];
            }
        }
        let beta = &betas[t * d..(t + 1) * d];
        let vt = &vecs[t * p..(t + 1) * p];
        for k in 0..d {
            for l in 0..p {
                acc.rhs[k * p + l] += beta[k] * vt[l];
            }
            for k2 in 0..d {
                let bb = beta[k] * beta[k2];
                if bb == 0.0 {
                    continue;
                }
                for l in 0..p {
                    let row = (k * p + l) * dim + k2 * p;
                    for l2 in 0..p {
                        acc.gram[row + l2] += bb * mt[l * p + l2];
                    }
                }
            }
        }
    }
}

struct Pass {
    fits: Vec<LocalFit>,
    step4: Option<Step4>,
}

/// Steps 2 and 3 (and the step-4 accumulation when `step4`) at index `b`.
fn pass(
    prob: &Problem,
    b: &DMatrix<f64>,
    kernel: &ScaledKernel,
    resp: &[f64],
    ridge: f64,
    step4: bool,
) -> Result<Pass> {
    let (n, p, d) = (prob.n, prob.p, b.ncols());
    let bm = IndexMatrixView(b);
    let u = bm.project_rows(prob.x, p);
    let chunks = map_chunks(n, CHUNK, |range| -> Result<(Vec<LocalFit>, Option<Step4>)> {
        let mut nb = Vec::with_capacity(n);
        let mut fits = Vec::with_capacity(range.len());
        let mut acc = if step4 { Some(Step4::zeros(p * d)) } else { None };
        for j in range {
            neighbours(&u, n, d, j, kernel, &mut nb);
            let fit = local_solve(prob, &u, d, j, &nb, resp, ridge)?;
            if let Some(acc) = acc.as_mut() {
                accumulate_step4(prob, d, j, &nb, resp, &fit, acc);
            }
            fits.push(fit);
        }
        Ok((fits, acc))
    });
    let mut fits = Vec::with_capacity(n);
    let mut total = if step4 { Some(Step4::zeros(p * d)) } else { None };
    for chunk in chunks {
        let (f, acc) = chunk?;
        fits.extend(f);
        if let (Some(t), Some(a)) = (total.as_mut(), acc.as_ref()) {
            t.add(a);
        }
    }
    Ok(Pass { fits, step4: total })
}

struct IndexMatrixView<'a>(&'a DMatrix<f64>);

impl IndexMatrixView<'_> {
    fn project_rows(&self, x: &[f64], p: usize) -> Vec<f64> {
        let d = self.0.ncols();
        let n = x.len() / p;
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            let xi = &x[i * p..(i + 1) * p];
            for k in 0..d {
                out[i * d + k] = self.0.column(k).iter().zip(xi).map(|(a, b)| a * b).sum();
            }
        }
        out
    }
}

fn solve_step4(acc: &Step4, p: usize, d: usize, ridge: f64) -> Result<(DMatrix<f64>, f64)> {
    let dim = p * d;
    let gram = DMatrix::from_row_slice(dim, dim, &acc.gram);
    let rhs = DVector::from_column_slice(&acc.rhs);
    let sol = solve_gram(&gram, &rhs, ridge)?;
    let theta: Vec<f64> = sol.coefficients.iter().copied().collect();
    let loss = acc.quadratic(&theta).max(0.0);
    Ok((DMatrix::from_column_slice(p, d, &theta), loss))
}

/// Initial index for `d = 1`: weighted regression of `r_i` on
/// `v_{t_i} (x) (1, X_i - mean)` alternated with kernel weights
/// `K_h(b^T (X_i - mean))`; the direction is the leading right singular
/// vector of the slope block.
fn initial_direction(prob: &Problem, resp: &[f64], h: f64, family: KernelFamily, ridge: f64) -> Result<DVector<f64>> {
    let (n, p, m) = (prob.n, prob.p, prob.m);
    let s = p + 1;
    let q = m * s;
    let mean: Vec<f64> = (0..p).map(|c| (0..n).map(|i| prob.x[i * p + c]).sum::<f64>() / n as f64).collect();
    let kernel = KernelSpec::new(family, 1).scaled(h)?;
    let mut weights = vec![1.0; n];
    let mut direction: Option<DVector<f64>> = None;
    for _ in 0..=INITIAL_ALTERNATIONS {
        let slope = initial_wls(prob, resp, &mean, &weights, ridge)?;
        let dir = if m == 1 {
            slope.row(0).transpose()
        } else {
            leading_eigenvectors(&(slope.transpose() * &slope), 1).column(0).into_owned()
        };
        let norm = dir.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return direction.ok_or(Error::RankDeficient);
        }
        let dir = dir / norm;
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let proj: f64 = (0..p).map(|c| dir[c] * (prob.x[i * p + c] - mean[c])).sum();
                kernel.at_sq(proj * proj)
            })
            .collect();
        direction = Some(dir);
        // A kernel window that captures fewer points than parameters cannot
        // identify the next regression.
        if next.iter().filter(|w| **w > 0.0).count() <= q {
            break;
        }
        weights = next;
    }
    direction.ok_or(Error::RankDeficient)
}

/// Slope block (`m x p`) of the initial weighted regression.
pub(crate) fn initial_wls(
    prob: &Problem,
    resp: &[f64],
    mean: &[f64],
    weights: &[f64],
    ridge: f64,
) -> Result<DMatrix<f64>> {
    let (n, p, m) = (prob.n, prob.p, prob.m);
    let s = p + 1;
    let q = m * s;
    let mut gram = DMatrix::<f64>::zeros(q, q);
    let mut rhs = DVector::<f64>::zeros(q);
    let mut row = vec![0.0; q];
    for i in 0..n {
        let omega = weights[i] * prob.inv_pi[i];
        if omega == 0.0 {
            continue;
        }
        let v = &prob.coef[prob.level[i]];
        let xi = prob.row(i);
        for k in 0..m {
            row[k * s] = v[k];
            for c in 0..p {
                row[k * s + 1 + c] = v[k] * (xi[c] - mean[c]);
            }
        }
        for a in 0..q {
            let ra = omega * row[a];
            rhs[a] += ra * resp[i];
            for b in a..q {
                gram[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let theta = solve_gram(&gram, &rhs, ridge)?.coefficients;
    Ok(DMatrix::from_fn(m, p, |k, c| theta[k * s + 1 + c]))
}

/// Outer product of local gradients: for every anchor, a `p`-dimensional
/// Gaussian-weighted local linear fit of `r_i` on `v_{t_i} (x) (1, X_i - X_j)`;
/// returns `sum_j C_j^T C_j` over the slope blocks `C_j`.
fn gradient_outer_products(prob: &Problem, resp: &[f64], h: f64, ridge: f64) -> Result<DMatrix<f64>> {
    let (n, p, m) = (prob.n, prob.p, prob.m);
    let s = p + 1;
    let q = m * s;
    let kernel = KernelSpec::new(KernelFamily::Gaussian, p).scaled(h)?;
    let chunks = map_chunks(n, CHUNK, |range| -> Result<DMatrix<f64>> {
        let mut acc = DMatrix::<f64>::zeros(p, p);
        let mut row = vec![0.0; q];
        let mut z = vec![0.0; p];
        for j in range {
            let xj = prob.row(j);
            let mut gram = DMatrix::<f64>::zeros(q, q);
            let mut rhs = DVector::<f64>::zeros(q);
            for i in 0..n {
                let xi = prob.row(i);
                let mut r2 = 0.0;
                for c in 0..p {
                    z[c] = xi[c] - xj[c];
                    r2 += z[c] * z[c];
                }
                let omega = kernel.at_sq(r2) * prob.inv_pi[i];
                if omega == 0.0 {
                    continue;
                }
                let v = &prob.coef[prob.level[i]];
                for k in 0..m {
                    row[k * s] = v[k];
                    for c in 0..p {
                        row[k * s + 1 + c] = v[k] * z[c];
                    }
                }
                for a in 0..q {
                    let ra = omega * row[a];
                    rhs[a] += ra * resp[i];
                    for b in a..q {
                        gram[(a, b)] += ra * row[b];
                    }
                }
            }
            for a in 0..q {
                for b in 0..a {
                    gram[(a, b)] = gram[(b, a)];
                }
            }
            let theta = solve_gram(&gram, &rhs, ridge)?.coefficients;
            let slope = DMatrix::from_fn(m, p, |k, c| theta[k * s + 1 + c]);
            acc += slope.transpose() * slope;
        }
        Ok(acc)
    });
    let mut total = DMatrix::<f64>::zeros(p, p);
    for c in chunks {
        total += c?;
    }
    Ok(total)
}

pub(crate) fn initial_index(
    prob: &Problem,
    d: usize,
    resp: &[f64],
    h: f64,
    family: KernelFamily,
    ridge: f64,
) -> Result<IndexMatrix> {
    check_dimension(d, prob.p)?;
    let first = initial_direction(prob, resp, h, family, ridge)?;
    if d == 1 {
        return grassmann_normalize(&DMatrix::from_column_slice(prob.p, 1, first.as_slice()));
    }
    let p = prob.p;
    let h_opg = RULE_OF_THUMB * prob.mean_column_sd() * libm::pow(prob.n as f64, -1.0 / (p as f64 + 4.0));
    let opg = gradient_outer_products(prob, resp, h_opg, ridge)?;
    let proj = DMatrix::<f64>::identity(p, p) - &first * first.transpose();
    let rest = leading_eigenvectors(&(&proj * opg * &proj), d - 1);
    let mut b = DMatrix::<f64>::zeros(p, d);
    b.set_column(0, &first);
    for k in 1..d {
        b.set_column(k, &rest.column(k - 1));
    }
    grassmann_normalize(&b)
}

fn residual_response(y: &[f64], eta: &[f64]) -> Vec<f64> {
    y.iter().zip(eta).map(|(y, e)| y - e).collect()
}

/// Runs the alternating algorithm for the treatment structure `spec`.
pub(crate) fn fit_with_contrast(
    ds: &Dataset,
    spec: &ContrastSpec,
    d: usize,
    eta: EtaMode,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    check_dimension(d, ds.p())?;
    let prob = Problem::new(ds, spec)?;
    let song = matches!(eta, EtaMode::SongPi);
    let prob_pos: Vec<f64> =
        if song { (0..ds.n()).map(|i| ds.prob_positive(i)).collect::<Result<_>>()? } else { Vec::new() };
    let mut offsets = eta.offsets(ds.n())?;
    let mut resp = residual_response(ds.y(), &offsets);
    let (n, p) = (prob.n, prob.p);

    let rh = cfg.bandwidth.rh.unwrap_or(1.0 / (p.max(3) as f64 + 6.0));
    let c_init = cfg.bandwidth.c1.unwrap_or(RULE_OF_THUMB * prob.mean_column_sd());
    let h0 = c_init * libm::pow(n as f64, -rh);
    let mut b = initial_index(&prob, d, &resp, h0, cfg.kernel, cfg.ridge)?;

    let scale = projected_sd(&b.project_rows(prob.x), n, d);
    let c1 = cfg.bandwidth.c1.unwrap_or(RULE_OF_THUMB * scale);
    let c3 = cfg.bandwidth.c3.unwrap_or(c1);
    let rh_prime = cfg.bandwidth.rh_prime.unwrap_or(1.0 / (d as f64 + 3.0));
    let schedule = BandwidthSchedule::new(c1, c3, rh, rh_prime, n, p, d)?;
    let spec_d = KernelSpec::new(cfg.kernel, d);

    let mut loss_trace = Vec::new();
    let mut h_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut h = schedule.h1();
    for t in 1..=cfg.max_iter {
        h = schedule.at(t);
        let kernel = spec_d.scaled(h)?;
        let out = pass(&prob, b.matrix(), &kernel, &resp, cfg.ridge, true)?;
        let acc = out.step4.expect("step-4 accumulation requested");
        let (btilde, loss) = solve_step4(&acc, p, d, cfg.ridge)?;
        let next = normalize_or_complete(&btilde, &b)?;
        let diff = (next.matrix() - b.matrix()).norm();
        b = next;
        iterations = t;
        loss_trace.push(loss / (n * n) as f64);
        h_trace.push(h);
        if song {
            for i in 0..n {
                offsets[i] = (1.0 - 2.0 * prob_pos[i]) * out.fits[i].value();
            }
            resp = residual_response(ds.y(), &offsets);
        }
        if diff < cfg.tol {
            converged = true;
            break;
        }
    }
    let kernel = spec_d.scaled(h)?;
    let final_pass = pass(&prob, b.matrix(), &kernel, &resp, cfg.ridge, false)?;
    let degenerate_fits = final_pass.fits.iter().filter(|f| f.degenerate).count();
    Ok(FitResult {
        b,
        eta,
        loss_trace,
        h_trace,
        local_fits: final_pass.fits,
        iterations,
        converged,
        seed: cfg.seed,
        schedule,
        degenerate_fits,
    })
}

/// `imave_fit`: the binary-treatment estimator with contrast `(1, -1)`.
pub fn imave_fit(ds: &Dataset, d: usize, eta: EtaMode, cfg: &FitConfig) -> Result<FitResult> {
    if !ds.is_binary() {
        return Err(Error::NotBinary);
    }
    fit_with_contrast(ds, &ContrastSpec::binary(), d, eta, cfg)
}

/// Initial index estimate for a binary dataset at bandwidth `h`.
pub fn initial_estimator(ds: &Dataset, d: usize, eta: &EtaMode, h: f64, family: KernelFamily) -> Result<IndexMatrix> {
    let prob = binary_problem(ds)?;
    let resp = residual_response(ds.y(), &eta.offsets(ds.n())?);
    initial_index(&prob, d, &resp, h, family, DEFAULT_RIDGE)
}

/// Slope block of the weighted regression behind [`initial_estimator`]:
/// regresses `Y_i - eta_i` on `T_i / 2 (1, X_i - center)` with weights
/// `weights_i / pi_i`; returns the `p` slopes.
pub fn initial_regression(ds: &Dataset, eta: &EtaMode, center: &[f64], weights: &[f64]) -> Result<DVector<f64>> {
    let prob = binary_problem(ds)?;
    let resp = residual_response(ds.y(), &eta.offsets(ds.n())?);
    Ok(initial_wls(&prob, &resp, center, weights, DEFAULT_RIDGE)?.row(0).transpose())
}

fn binary_problem(ds: &Dataset) -> Result<Problem<'_>> {
    if !ds.is_binary() {
        return Err(Error::NotBinary);
    }
    Problem::new(ds, &ContrastSpec::binary())
}

/// Dense kernel weights `W[(i, j)] = K_h(B^T X_i - B^T X_j)`.
pub fn kernel_weights(ds: &Dataset, b: &IndexMatrix, family: KernelFamily, h: f64) -> Result<DMatrix<f64>> {
    let kernel = KernelSpec::new(family, b.d()).scaled(h)?;
    let d = b.d();
    let u = b.project_rows(ds.x_rows());
    Ok(DMatrix::from_fn(ds.n(), ds.n(), |i, j| {
        let r2: f64 = (0..d)
            .map(|k| {
                let e = u[i * d + k] - u[j * d + k];
                e * e
            })
            .sum();
        kernel.at_sq(r2)
    }))
}

fn column_neighbours(w_col: &[f64]) -> Vec<(usize, f64)> {
    w_col.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, w)| (i, *w)).collect()
}

/// Step 3 at anchor `j` with explicit weights `w_col[i] = w_ij`.
pub fn local_linear_fit(ds: &Dataset, b: &IndexMatrix, j: usize, eta: &EtaMode, w_col: &[f64]) -> Result<LocalFit> {
    if w_col.len() != ds.n() || j >= ds.n() {
        return Err(Error::DimensionMismatch("weight column".to_string()));
    }
    let prob = binary_problem(ds)?;
    let resp = residual_response(ds.y(), &eta.offsets(ds.n())?);
    let u = b.project_rows(ds.x_rows());
    local_solve(&prob, &u, b.d(), j, &column_neighbours(w_col), &resp, DEFAULT_RIDGE)
}

/// Step 4: the unnormalized minimizer of `L_2` for fixed local fits and
/// weights (`weights[(i, j)] = w_ij`).
pub fn update_b(ds: &Dataset, fits: &[LocalFit], weights: &DMatrix<f64>, eta: &EtaMode) -> Result<DMatrix<f64>> {
    let prob = binary_problem(ds)?;
    let n = ds.n();
    if fits.len() != n || weights.shape() != (n, n) {
        return Err(Error::DimensionMismatch("fits or weights".to_string()));
    }
    let d = fits[0].b.ncols();
    let resp = residual_response(ds.y(), &eta.offsets(n)?);
    let mut acc = Step4::zeros(ds.p() * d);
    for (j, fit) in fits.iter().enumerate() {
        let col: Vec<f64> = weights.column(j).iter().copied().collect();
        let nb = column_neighbours(&col);
        if nb.is_empty() {
            return Err(Error::AllWeightsZero(j));
        }
        accumulate_step4(&prob, d, j, &nb, &resp, fit, &mut acc);
    }
    Ok(solve_step4(&acc, ds.p(), d, DEFAULT_RIDGE)?.0)
}

/// `L_2(B)` evaluated term by term:
/// `n^{-2} sum_j sum_i w_ij / pi_i {Y_i - eta_i - T_i/2 [a_j + b_j^T B^T (X_i - X_j)]}^2`.
pub fn l2_loss(
    ds: &Dataset,
    b: &DMatrix<f64>,
    fits: &[LocalFit],
    weights: &DMatrix<f64>,
    eta: &EtaMode,
) -> Result<f64> {
    let n = ds.n();
    let pi = ds.require_pi()?;
    let offsets = eta.offsets(n)?;
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            let w = weights[(i, j)];
            if w == 0.0 {
                continue;
            }
            let z = DVector::from_iterator(ds.p(), ds.row(i).iter().zip(ds.row(j)).map(|(a, c)| a - c));
            let lin = (fits[j].b.row(0) * (b.transpose() * z))[0];
            let r = ds.y()[i] - offsets[i] - 0.5 * ds.t()[i] as f64 * (fits[j].a[0] + lin);
            total += w / pi[i] * r * r;
        }
    }
    Ok(total / (n * n) as f64)
}

/// `loss_eval`: `n^{-1} sum_i {Y_i - T_i g_i / 2 - eta_i}^2 / pi_i`.
pub fn loss_eval(ds: &Dataset, g_vals: &[f64], eta: &EtaMode) -> Result<f64> {
    let n = ds.n();
    if g_vals.len() != n {
        return Err(Error::DimensionMismatch("g values".to_string()));
    }
    if !ds.is_binary() {
        return Err(Error::NotBinary);
    }
    let pi = ds.require_pi()?;
    let offsets = eta.offsets(n)?;
    let total: f64 = (0..n)
        .map(|i| {
            let r = ds.y()[i] - 0.5 * ds.t()[i] as f64 * g_vals[i] - offsets[i];
            r * r / pi[i]
        })
        .sum();
    Ok(total / n as f64)
}
