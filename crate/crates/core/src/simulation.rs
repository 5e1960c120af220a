//! Scenario generators, evaluation metrics and the replication study.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{logistic, Dataset};
use crate::error::{Error, Result};
use crate::index::{grassmann_normalize, IndexMatrix};

/// Shape of the true contrast `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GShape {
    /// `tau u`
    Linear,
    /// `tau (1 / (1 + e^{-u}) - 1/2)`
    Logistic,
    /// `tau (Phi(u) - 1/2)`
    Gaussian,
    /// `tau (Phi(u_1) - 1/2) + tau (Phi(u_2) - 1/2)`
    TwoIndexGaussian,
}

impl GShape {
    pub fn name(self) -> &'static str {
        match self {
            GShape::Linear => "linear",
            GShape::Logistic => "logistic",
            GShape::Gaussian => "gaussian",
            GShape::TwoIndexGaussian => "two_index_gaussian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Some(GShape::Linear),
            "logistic" => Some(GShape::Logistic),
            "gaussian" => Some(GShape::Gaussian),
            "two_index_gaussian" | "two-index-gaussian" | "twoindex" => Some(GShape::TwoIndexGaussian),
            _ => None,
        }
    }

    /// Number of indices the shape consumes.
    pub fn indices(self) -> usize {
        if self == GShape::TwoIndexGaussian {
            2
        } else {
            1
        }
    }

    /// `g` at the raw indices `u_k = beta_k^T x`.
    pub fn eval(self, tau: f64, u: &[f64]) -> f64 {
        match self {
            GShape::Linear => tau * u[0],
            GShape::Logistic => tau * (logistic(u[0]) - 0.5),
            GShape::Gaussian => tau * (normal_cdf(u[0]) - 0.5),
            GShape::TwoIndexGaussian => tau * (normal_cdf(u[0]) - 0.5) + tau * (normal_cdf(u[1]) - 0.5),
        }
    }
}

pub fn normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / core::f64::consts::SQRT_2)
}

/// How treatments are assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// `P(T = +1) = 1/2` independent of `X`.
    Balanced,
    /// `P(T = +1 | X) = logistic(c^T X)` (no intercept).
    Logistic(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub shape: GShape,
    pub tau: f64,
    pub gamma: f64,
    pub sigma: f64,
    /// Raw directions `beta_k` as the columns of a `p x indices` matrix; the
    /// main effect uses the first column.
    pub directions: Vec<Vec<f64>>,
    pub n: usize,
    pub assignment: Assignment,
    pub seed: u64,
}

/// Assignment coefficients of the estimated-propensity design.
pub const LOGISTIC_ASSIGNMENT: [f64; 4] = [0.2, -0.2, 0.2, -0.2];

impl ScenarioSpec {
    /// Single-index design: `p = 4`, `beta = (1, 1, 1, 1)`, `gamma = 1`,
    /// `sigma = 0.6`, `tau = 7`, balanced assignment. The two-index shape
    /// uses the `p = 10` design with `gamma = 0.1` instead.
    pub fn standard(shape: GShape, n: usize, seed: u64) -> Self {
        if shape == GShape::TwoIndexGaussian {
            return Self::two_index(n, seed);
        }
        ScenarioSpec {
            shape,
            tau: 7.0,
            gamma: 1.0,
            sigma: 0.6,
            directions: vec![vec![1.0; 4]],
            n,
            assignment: Assignment::Balanced,
            seed,
        }
    }

    /// `p = 10`, `beta_1 = (1, ..., 1)`, `beta_2 = (1, -1, 1, ...)`,
    /// `gamma = 0.1`.
    pub fn two_index(n: usize, seed: u64) -> Self {
        let b2 = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        ScenarioSpec {
            shape: GShape::TwoIndexGaussian,
            tau: 7.0,
            gamma: 0.1,
            sigma: 0.6,
            directions: vec![vec![1.0; 10], b2],
            n,
            assignment: Assignment::Balanced,
            seed,
        }
    }

    pub fn p(&self) -> usize {
        self.directions[0].len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidConfig("sigma must be nonnegative".to_string()));
        }
        if self.n < 2 {
            return Err(Error::InvalidDimension("n must be at least 2".to_string()));
        }
        let p = self.p();
        if p == 0 || self.directions.iter().any(|b| b.len() != p) {
            return Err(Error::DimensionMismatch("directions".to_string()));
        }
        if self.directions.len() < self.shape.indices() {
            return Err(Error::DimensionMismatch("too few directions for the g shape".to_string()));
        }
        if let Assignment::Logistic(c) = &self.assignment {
            if c.len() != p {
                return Err(Error::DimensionMismatch("assignment coefficients".to_string()));
            }
        }
        Ok(())
    }

    /// Normalized true index matrix (the span of the used directions).
    pub fn true_index(&self) -> Result<IndexMatrix> {
        let k = self.shape.indices();
        let p = self.p();
        let m = DMatrix::from_fn(p, k, |r, c| self.directions[c][r]);
        grassmann_normalize(&m)
    }

    /// True `P(T = +1 | x)`.
    pub fn prob_positive(&self, x: &[f64]) -> f64 {
        match &self.assignment {
            Assignment::Balanced => 0.5,
            Assignment::Logistic(c) => logistic(c.iter().zip(x).map(|(a, b)| a * b).sum()),
        }
    }

    /// Raw indices `beta_k^T x`.
    pub fn indices_at(&self, x: &[f64]) -> Vec<f64> {
        self.directions.iter().map(|b| b.iter().zip(x).map(|(a, c)| a * c).sum()).collect()
    }

    pub fn g_at(&self, x: &[f64]) -> f64 {
        self.shape.eval(self.tau, &self.indices_at(x))
    }

    pub fn main_effect_at(&self, x: &[f64]) -> f64 {
        let u: f64 = self.directions[0].iter().zip(x).map(|(a, b)| a * b).sum();
        let s = self.gamma * u;
        s * s
    }
}

/// Generated data with the quantities needed to score estimates.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    /// Propensities are the true ones for the observed arm.
    pub dataset: Dataset,
    pub g: Vec<f64>,
    pub main_effect: Vec<f64>,
    /// First raw index `beta_1^T X_i`.
    pub index: Vec<f64>,
    pub b0: IndexMatrix,
}

/// `generate_data`: `Y = (gamma beta^T X)^2 + T g(beta^T X) / 2 + eps` with
/// `X ~ N(0, I_p)` and `eps ~ N(0, sigma^2)`.
pub fn generate_data(spec: &ScenarioSpec) -> Result<SimulatedData> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.sigma).map_err(|_| Error::InvalidConfig("sigma".to_string()))?;
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut pi = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut main = Vec::with_capacity(n);
    let mut index = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let pos = spec.prob_positive(&row);
        let ti = if rng.random::<f64>() < pos { 1 } else { -1 };
        let e: f64 = noise.sample(&mut rng);
        let gi = spec.g_at(&row);
        let mi = spec.main_effect_at(&row);
        y.push(mi + 0.5 * ti as f64 * gi + e);
        t.push(ti);
        pi.push(if ti == 1 { pos } else { 1.0 - pos });
        g.push(gi);
        main.push(mi);
        index.push(spec.indices_at(&row)[0]);
        x.extend(row);
    }
    if !t.contains(&1) || !t.contains(&-1) {
        return Err(Error::DegenerateTreatment("simulated sample has a single arm".to_string()));
    }
    let dataset = Dataset::new(x, n, p, y, t, 2, Some(pi))?;
    Ok(SimulatedData { dataset, g, main_effect: main, index, b0: spec.true_index()? })
}

/// Mixes a base seed with a path of integers into an independent stream seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut h = seed;
    for &v in path {
        h = splitmix(h ^ splitmix(v.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
