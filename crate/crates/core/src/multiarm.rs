//! Contrasts among `K >= 2` treatment levels.
//!
//! Level `t` has mean structure `h(t, x) = v_t^T g(B^T x)` with
//! `v_t = (Omega Omega^T)^{-1} Omega_{.t}`; the zero row sums of `Omega` make
//! the level effects sum to zero at every `x`.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::data::{ContrastSpec, Dataset};
use crate::efficiency::{rule_of_thumb_bandwidth, KernelSmoother, Smoothed};
use crate::error::{Error, Result};
use crate::fit::{fit_with_contrast, EtaMode, FitConfig, FitResult};
use crate::index::IndexMatrix;

/// A fitted `K`-arm model: index, contrast and a smoother for `g`.
#[derive(Debug, Clone)]
pub struct MultiArmModel {
    pub spec: ContrastSpec,
    pub fit: FitResult,
    smoother: KernelSmoother,
}

impl MultiArmModel {
    pub fn index(&self) -> &IndexMatrix {
        &self.fit.b
    }

    /// `g_hat(x)`, the `K - 1` smoothed contrasts
    /// `sum w_{T_i} Y_i K_h(B^T (X_i - x)) / sum K_h(...)` with
    /// `w_T = Omega_{.T} / pi_T`.
    pub fn predict_contrast(&self, x: &[f64]) -> Result<Smoothed> {
        let b = self.index();
        if x.len() != b.p() {
            return Err(Error::DimensionMismatch("query length differs from p".to_string()));
        }
        let mut z = alloc::vec![0.0; b.d()];
        b.project_into(x, &mut z);
        Ok(self.smoother.at(&z))
    }

    /// `h(t, x)` for every zero-based level `t`.
    pub fn level_effects(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = DVector::from_vec(self.predict_contrast(x)?.values);
        Ok(level_effects(&self.spec, &g))
    }
}

/// `v_t^T g` for each level.
pub fn level_effects(spec: &ContrastSpec, g: &DVector<f64>) -> Vec<f64> {
    (0..spec.levels()).map(|t| spec.level_coefficients(t).dot(g)).collect()
}

/// `multiarm_fit`: the alternating estimator with observation coefficients
/// `v_t`. With `K = 2` and `Omega = (1, -1)` this is exactly `imave_fit`.
pub fn multiarm_fit(
    ds: &Dataset,
    spec: &ContrastSpec,
    d: usize,
    eta: EtaMode,
    cfg: &FitConfig,
) -> Result<MultiArmModel> {
    let fit = fit_with_contrast(ds, spec, d, eta, cfg)?;
    let smoother = contrast_smoother(ds, spec, &fit.b, cfg)?;
    Ok(MultiArmModel { spec: spec.clone(), fit, smoother })
}

/// Smoother of the `K - 1` contrasts along a given index, with responses
/// `Omega_{.T_i} Y_i / pi_i`.
pub fn contrast_smoother(
    ds: &Dataset,
    spec: &ContrastSpec,
    b: &IndexMatrix,
    cfg: &FitConfig,
) -> Result<KernelSmoother> {
    if spec.levels() != ds.k() {
        return Err(Error::InvalidContrast("contrast columns differ from the number of levels".to_string()));
    }
    if b.p() != ds.p() {
        return Err(Error::DimensionMismatch("index rows differ from p".to_string()));
    }
    let pi = ds.require_pi()?;
    let m = spec.contrasts();
    let mut responses = Vec::with_capacity(ds.n() * m);
    for i in 0..ds.n() {
        let col = spec.omega().column(ds.level(i));
        responses.extend(col.iter().map(|o| o / pi[i] * ds.y()[i]));
    }
    let coords = b.project_rows(ds.x_rows());
    let h = cfg.smoother.h_g.unwrap_or_else(|| rule_of_thumb_bandwidth(&coords, ds.n(), b.d()));
    KernelSmoother::new(coords, b.d(), responses, m, cfg.smoother.kernel, h)
}
