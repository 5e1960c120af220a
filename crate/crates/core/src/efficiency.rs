//! iMAVE2: Nadaraya-Watson estimates of `g` and of `E[eps | X]`, and the
//! refit that subtracts the latter.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{imave_fit, EtaMode, FitConfig, FitResult};
use crate::index::IndexMatrix;
use crate::kernel::{KernelFamily, KernelSpec, ScaledKernel, RULE_OF_THUMB};
use crate::linalg::std_dev;
use crate::parallel::map_indexed;

/// A smoothed value at one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub values: Vec<f64>,
    /// No training point had positive weight; `values` is the response of
    /// the nearest training point.
    pub fallback: bool,
}

impl Smoothed {
    pub fn value(&self) -> f64 {
        self.values[0]
    }
}

/// `2.34 n^{-1/(dim + 4)}` times the mean column standard deviation of
/// `coords` (`n x dim`, row-major).
pub fn rule_of_thumb_bandwidth(coords: &[f64], n: usize, dim: usize) -> f64 {
    let sd = if n < 2 {
        1.0
    } else {
        (0..dim).map(|k| std_dev((0..n).map(|i| coords[i * dim + k]))).sum::<f64>() / dim as f64
    };
    let sd = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
    RULE_OF_THUMB * libm::pow(n as f64, -1.0 / (dim as f64 + 4.0)) * sd
}

/// Vector-valued Nadaraya-Watson smoother over points in `R^dim`.
#[derive(Debug, Clone)]
pub struct KernelSmoother {
    coords: Vec<f64>,
    dim: usize,
    responses: Vec<f64>,
    width: usize,
    kernel: ScaledKernel,
    h: f64,
}

impl KernelSmoother {
    /// `coords` is `n x dim` and `responses` is `n x width`, both row-major.
    pub fn new(
        coords: Vec<f64>,
        dim: usize,
        responses: Vec<f64>,
        width: usize,
        family: KernelFamily,
        h: f64,
    ) -> Result<Self> {
        let n = coords.len().checked_div(dim).unwrap_or(0);
        if n == 0 || coords.len() != n * dim || responses.len() != n * width || width == 0 {
            return Err(Error::DimensionMismatch("smoother inputs".to_string()));
        }
        let kernel = KernelSpec::new(family, dim).scaled(h)?;
        Ok(KernelSmoother { coords, dim, responses, width, kernel, h })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Smoothed response at `z`.
    pub fn at(&self, z: &[f64]) -> Smoothed {
        let (dim, width) = (self.dim, self.width);
        let mut num = vec![0.0; width];
        let mut den = 0.0;
        let mut nearest = (f64::INFINITY, 0);
        for i in 0..self.len() {
            let ci = &self.coords[i * dim..(i + 1) * dim];
            let r2: f64 = ci.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            if r2 < nearest.0 {
                nearest = (r2, i);
            }
            let w = self.kernel.at_sq(r2);
            if w > 0.0 {
                den += w;
                for (acc, r) in num.iter_mut().zip(&self.responses[i * width..(i + 1) * width]) {
                    *acc += w * r;
                }
            }
        }
        if den > 1e-300 {
            Smoothed { values: num.into_iter().map(|v| v / den).collect(), fallback: false }
        } else {
            let i = nearest.1;
            Smoothed { values: self.responses[i * width..(i + 1) * width].to_vec(), fallback: true }
        }
    }

    /// Smoothed responses at the rows of `points` (`m x dim`, row-major).
    pub fn at_rows(&self, points: &[f64]) -> Vec<Smoothed> {
        let dim = self.dim;
        map_indexed(points.len() / dim, |i| self.at(&points[i * dim..(i + 1) * dim]))
    }
}

/// `g_hat(x) = sum w_{T_i} Y_i K_h(B^T (X_i - x)) / sum K_h(B^T (X_i - x))`
/// with `w_T = T / pi_T`.
#[derive(Debug, Clone)]
pub struct GEstimate {
    b: IndexMatrix,
    smoother: KernelSmoother,
}

impl GEstimate {
    /// `h = None` selects the rule-of-thumb bandwidth on the projected
    /// training points.
    pub fn new(ds: &Dataset, b: &IndexMatrix, family: KernelFamily, h: Option<f64>) -> Result<Self> {
        if b.p() != ds.p() {
            return Err(Error::DimensionMismatch("index matrix rows differ from p".to_string()));
        }
        let pi = ds.require_pi()?;
        if !ds.is_binary() {
            return Err(Error::NotBinary);
        }
        let responses: Vec<f64> = (0..ds.n()).map(|i| ds.t()[i] as f64 / pi[i] * ds.y()[i]).collect();
        let coords = b.project_rows(ds.x_rows());
        let h = h.unwrap_or_else(|| rule_of_thumb_bandwidth(&coords, ds.n(), b.d()));
        let smoother = KernelSmoother::new(coords, b.d(), responses, 1, family, h)?;
        Ok(GEstimate { b: b.clone(), smoother })
    }

    pub fn index(&self) -> &IndexMatrix {
        &self.b
    }

    pub fn bandwidth(&self) -> f64 {
        self.smoother.bandwidth()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Smoothed> {
        if x.len() != self.b.p() {
            return Err(Error::DimensionMismatch("query length differs from p".to_string()));
        }
        let mut z = vec![0.0; self.b.d()];
        self.b.project_into(x, &mut z);
        Ok(self.smoother.at(&z))
    }

    /// Predictions at the rows of `x` (`m x p`, row-major).
    pub fn predict_rows(&self, x: &[f64]) -> Result<Vec<Smoothed>> {
        if !x.len().is_multiple_of(self.b.p()) {
            return Err(Error::DimensionMismatch("query rows".to_string()));
        }
        Ok(self.smoother.at_rows(&self.b.project_rows(x)))
    }
}

/// `predict_g` at a single point with the fitted index of `fit`.
pub fn predict_g(fit: &FitResult, ds: &Dataset, x: &[f64], family: KernelFamily, h: Option<f64>) -> Result<Smoothed> {
    GEstimate::new(ds, &fit.b, family, h)?.predict(x)
}

/// `eps_i = Y_i - T_i g_hat(B^T X_i) / 2`.
pub fn residuals(ds: &Dataset, ghat: &GEstimate) -> Result<Vec<f64>> {
    if !ds.is_binary() {
        return Err(Error::NotBinary);
    }
    let g = ghat.predict_rows(ds.x_rows())?;
    Ok((0..ds.n()).map(|i| ds.y()[i] - 0.5 * ds.t()[i] as f64 * g[i].value()).collect())
}

/// Full-dimensional smoother of the residuals, estimating `E[eps | X]`.
#[derive(Debug, Clone)]
pub struct EtaStarEstimate {
    smoother: KernelSmoother,
    residuals: Vec<f64>,
}

impl EtaStarEstimate {
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn bandwidth(&self) -> f64 {
        self.smoother.bandwidth()
    }

    pub fn predict(&self, x: &[f64]) -> Smoothed {
        self.smoother.at(x)
    }

    pub fn predict_rows(&self, x: &[f64]) -> Vec<Smoothed> {
        self.smoother.at_rows(x)
    }
}

pub fn estimate_eta_star(
    ds: &Dataset,
    eps_hat: &[f64],
    family: KernelFamily,
    h: Option<f64>,
) -> Result<EtaStarEstimate> {
    if eps_hat.len() != ds.n() {
        return Err(Error::DimensionMismatch("residual length differs from n".to_string()));
    }
    if eps_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("residuals".to_string()));
    }
    let coords = ds.x_rows().to_vec();
    let h = h.unwrap_or_else(|| rule_of_thumb_bandwidth(&coords, ds.n(), ds.p()));
    let smoother = KernelSmoother::new(coords, ds.p(), eps_hat.to_vec(), 1, family, h)?;
    Ok(EtaStarEstimate { smoother, residuals: eps_hat.to_vec() })
}

/// `eta_hat*` at the sample points, built from a first-stage fit.
pub fn eta_star_at_samples(ds: &Dataset, first: &FitResult, cfg: &FitConfig) -> Result<Vec<f64>> {
    let sm = &cfg.smoother;
    let ghat = GEstimate::new(ds, &first.b, sm.kernel, sm.h_g)?;
    let eps = residuals(ds, &ghat)?;
    let eta = estimate_eta_star(ds, &eps, sm.kernel, sm.h_eta)?;
    Ok(eta.predict_rows(ds.x_rows()).into_iter().map(|s| s.value()).collect())
}

/// Second stage of iMAVE2 given the first-stage (`eta = 0`) fit.
pub fn imave2_refit(ds: &Dataset, first: &FitResult, cfg: &FitConfig) -> Result<FitResult> {
    let eta = eta_star_at_samples(ds, first, cfg)?;
    imave_fit(ds, first.d(), EtaMode::EstimatedStar(eta), cfg)
}

/// `imave2_fit`: iMAVE with `eta = 0`, then the refit with `eta_hat*`.
pub fn imave2_fit(ds: &Dataset, d: usize, cfg: &FitConfig) -> Result<FitResult> {
    let first = imave_fit(ds, d, EtaMode::Zero, cfg)?;
    imave2_refit(ds, &first, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn line_data(y: Vec<f64>, t: Vec<i32>) -> Dataset {
        let n = y.len();
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        Dataset::new(x, n, 1, y, t, 2, Some(vec![0.5; n])).unwrap()
    }

    fn unit() -> IndexMatrix {
        IndexMatrix::from_orthonormal(DMatrix::from_element(1, 1, 1.0)).unwrap()
    }

    #[test]
    fn constant_weighted_response_is_reproduced() {
        // T Y / pi = 2 * (T Y) = 6 everywhere.
        let ds = line_data(vec![3.0, -3.0, 3.0, -3.0], vec![1, -1, 1, -1]);
        let g = GEstimate::new(&ds, &unit(), KernelFamily::Epanechnikov, Some(2.5)).unwrap();
        for x in [0.0, 1.3, 2.9] {
            let s = g.predict(&[x]).unwrap();
            assert!((s.value() - 6.0).abs() < 1e-12);
            assert!(!s.fallback);
        }
    }

    #[test]
    fn single_point_smoother_is_constant_in_range() {
        let sm = KernelSmoother::new(vec![0.0], 1, vec![-3.0], 1, KernelFamily::Epanechnikov, 0.5).unwrap();
        for z in [-0.4, 0.0, 0.3] {
            assert_eq!(sm.at(&[z]).value(), -3.0);
        }
    }

    #[test]
    fn empty_neighbourhood_falls_back_to_nearest() {
        let ds = line_data(vec![1.0, 2.0, -1.0], vec![1, 1, -1]);
        let g = GEstimate::new(&ds, &unit(), KernelFamily::Epanechnikov, Some(0.1)).unwrap();
        let s = g.predict(&[1.2]).unwrap();
        assert!(s.fallback);
        assert_eq!(s.value(), 4.0);
    }

    #[test]
    fn residuals_vanish_on_exact_data() {
        let ds = line_data(vec![1.0, -1.0, 1.0, -1.0], vec![1, -1, 1, -1]);
        let g = GEstimate::new(&ds, &unit(), KernelFamily::Epanechnikov, Some(10.0)).unwrap();
        let r = residuals(&ds, &g).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn eta_star_of_constant_residuals() {
        let ds = line_data(vec![1.0, -1.0, 2.0, 0.5], vec![1, -1, 1, -1]);
        let eta = estimate_eta_star(&ds, &[0.7; 4], KernelFamily::Biweight, Some(1.5)).unwrap();
        for x in [-0.5, 0.0, 2.2, 3.4] {
            assert!((eta.predict(&[x]).value() - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_length_checked() {
        let ds = line_data(vec![1.0, -1.0], vec![1, -1]);
        assert!(estimate_eta_star(&ds, &[0.0], KernelFamily::Epanechnikov, None).is_err());
    }

    #[test]
    fn rule_of_thumb_scales_with_spread() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 3.0 * v).collect();
        let ha = rule_of_thumb_bandwidth(&a, 100, 1);
        let hb = rule_of_thumb_bandwidth(&b, 100, 1);
        assert!((hb / ha - 3.0).abs() < 1e-12);
    }
}
