//! On-disk forms of fitted models and simulated ground truth.

use imave::simulation::SimulatedData;
use imave::{ContrastSpec, Error, FitResult, IndexMatrix, KernelFamily, PropensityModel, ScenarioSpec};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A dense matrix stored row-major with its dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])).collect();
        MatrixJson { rows: m.nrows(), cols: m.ncols(), data }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>, Error> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch("matrix data length differs from rows x cols".into()));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// Column centring and scaling applied before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, x: &mut [f64]) {
        let p = self.center.len();
        for (k, v) in x.iter_mut().enumerate() {
            *v = (*v - self.center[k % p]) / self.scale[k % p];
        }
    }
}

/// Everything `predict` needs to rebuild the contrast smoother.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub estimator: String,
    #[serde(rename = "B")]
    pub b: MatrixJson,
    pub d: usize,
    pub p: usize,
    pub n: usize,
    pub eta_mode: String,
    pub iterations: usize,
    pub converged: bool,
    pub loss_trace: Vec<f64>,
    pub h_trace: Vec<f64>,
    pub degenerate_fits: usize,
    pub seed: u64,
    pub kernel: KernelFamily,
    pub h_g: Option<f64>,
    pub levels: Vec<String>,
    pub contrast: ContrastSpec,
    pub propensity: PropensityModel,
    pub standardization: Option<Standardization>,
}

impl ModelFile {
    pub fn index(&self) -> Result<IndexMatrix, Error> {
        IndexMatrix::from_orthonormal(self.b.to_matrix()?)
    }
}

pub struct ModelContext {
    pub estimator: &'static str,
    pub kernel: KernelFamily,
    pub h_g: Option<f64>,
    pub levels: Vec<String>,
    pub contrast: ContrastSpec,
    pub propensity: PropensityModel,
    pub standardization: Option<Standardization>,
    pub n: usize,
}

pub fn model_file(fit: &FitResult, ctx: ModelContext) -> ModelFile {
    ModelFile {
        schema_version: SCHEMA_VERSION,
        estimator: ctx.estimator.to_string(),
        b: fit.b.matrix().into(),
        d: fit.d(),
        p: fit.b.p(),
        n: ctx.n,
        eta_mode: fit.eta.name().to_string(),
        iterations: fit.iterations,
        converged: fit.converged,
        loss_trace: fit.loss_trace.clone(),
        h_trace: fit.h_trace.clone(),
        degenerate_fits: fit.degenerate_fits,
        seed: fit.seed,
        kernel: ctx.kernel,
        h_g: ctx.h_g,
        levels: ctx.levels,
        contrast: ctx.contrast,
        propensity: ctx.propensity,
        standardization: ctx.standardization,
    }
}

/// The `simulate` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema_version: u32,
    pub scenario: ScenarioSpec,
    #[serde(rename = "B0")]
    pub b0: MatrixJson,
    /// `g(B_0^T X_i)` per row.
    pub g: Vec<f64>,
    pub main_effect: Vec<f64>,
    /// `beta_1^T X_i` per row.
    pub index: Vec<f64>,
}

impl TruthFile {
    pub fn new(scenario: ScenarioSpec, sim: &SimulatedData) -> Self {
        TruthFile {
            schema_version: SCHEMA_VERSION,
            scenario,
            b0: sim.b0.matrix().into(),
            g: sim.g.clone(),
            main_effect: sim.main_effect.clone(),
            index: sim.index.clone(),
        }
    }
}
