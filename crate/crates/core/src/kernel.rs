//! Spherically symmetric smoothing kernels and the iteration-indexed
//! bandwidth schedule.

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial profile of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    /// `c_d (1 - |u|^2)` on the unit ball.
    #[default]
    Epanechnikov,
    /// Quadratic (biweight) `c_d (1 - |u|^2)^2` on the unit ball.
    Biweight,
    /// Standard normal density. Has unbounded support.
    Gaussian,
}

impl KernelFamily {
    pub fn has_compact_support(self) -> bool {
        !matches!(self, KernelFamily::Gaussian)
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "epanechnikov" => Some(KernelFamily::Epanechnikov),
            "biweight" | "quadratic" => Some(KernelFamily::Biweight),
            "gaussian" => Some(KernelFamily::Gaussian),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Biweight => "biweight",
            KernelFamily::Gaussian => "gaussian",
        }
    }
}

/// Volume of the unit ball in `d` dimensions.
fn unit_ball_volume(d: usize) -> f64 {
    let (mut v, mut k) = if d.is_multiple_of(2) { (1.0, 0) } else { (2.0, 1) };
    while k < d {
        k += 2;
        v *= 2.0 * PI / k as f64;
    }
    v
}

/// A `d`-dimensional kernel normalized to integrate to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    norm: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dim: usize) -> Self {
        assert!(dim > 0, "kernel dimension must be positive");
        let d = dim as f64;
        let norm = match family {
            KernelFamily::Epanechnikov => (d + 2.0) / (2.0 * unit_ball_volume(dim)),
            KernelFamily::Biweight => (d + 2.0) * (d + 4.0) / (8.0 * unit_ball_volume(dim)),
            KernelFamily::Gaussian => libm::pow(2.0 * PI, -d / 2.0),
        };
        KernelSpec { family, dim, norm }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `K(v)` for `|v|^2 = r2`, unscaled.
    #[inline]
    pub fn profile(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::Epanechnikov => {
                if r2 < 1.0 {
                    self.norm * (1.0 - r2)
                } else {
                    0.0
                }
            }
            KernelFamily::Biweight => {
                if r2 < 1.0 {
                    let s = 1.0 - r2;
                    self.norm * s * s
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian => self.norm * libm::exp(-0.5 * r2),
        }
    }

    /// Precomputed scaling for repeated evaluation at one bandwidth.
    pub fn scaled(&self, h: f64) -> Result<ScaledKernel> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::NonPositiveBandwidth(h));
        }
        Ok(ScaledKernel { spec: *self, inv_h2: 1.0 / (h * h), factor: libm::pow(h, -(self.dim as f64)) })
    }

    /// `K_h(u) = h^{-d} K(u / h)`.
    pub fn eval(&self, u: &[f64], h: f64) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch("kernel argument length".into()));
        }
        let s = self.scaled(h)?;
        Ok(s.at_sq(u.iter().map(|v| v * v).sum()))
    }
}

/// A kernel bound to a bandwidth.
#[derive(Debug, Clone, Copy)]
pub struct ScaledKernel {
    spec: KernelSpec,
    inv_h2: f64,
    factor: f64,
}

impl ScaledKernel {
    /// `K_h(u)` given `|u|^2`.
    #[inline]
    pub fn at_sq(&self, r2: f64) -> f64 {
        self.factor * self.spec.profile(r2 * self.inv_h2)
    }
}

/// `kernel_eval`: `h^{-d} K(u / h)` with `d = u.len()`.
pub fn kernel_eval(family: KernelFamily, u: &[f64], h: f64) -> Result<f64> {
    KernelSpec::new(family, u.len().max(1)).eval(u, h)
}

/// Rule-of-thumb scale constant used for every default bandwidth.
pub const RULE_OF_THUMB: f64 = 2.34;

/// Shrinking bandwidth sequence `h_1 = c1 n^{-r_h}`,
/// `h_t = max(r_n h_{t-1}, hbar)` with `r_n = n^{-r_h / 2}` and
/// `hbar = c3 n^{-r'_h}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSchedule {
    pub c1: f64,
    pub c3: f64,
    pub rh: f64,
    pub rh_prime: f64,
    pub n: usize,
}

impl BandwidthSchedule {
    /// Validates the exponent ranges `0 < r_h <= 1/(max(p,3)+6)` and
    /// `0 < r'_h <= 1/(d+3)`.
    pub fn new(c1: f64, c3: f64, rh: f64, rh_prime: f64, n: usize, p: usize, d: usize) -> Result<Self> {
        let p0 = p.max(3) as f64;
        let eps = 1e-12;
        if !(c1 > 0.0 && c3 > 0.0) {
            return Err(Error::InvalidConfig("bandwidth constants must be positive".into()));
        }
        if !(rh > 0.0 && rh <= 1.0 / (p0 + 6.0) + eps) {
            return Err(Error::InvalidConfig(alloc::format!("r_h = {rh} outside (0, 1/(p0+6)]")));
        }
        if !(rh_prime > 0.0 && rh_prime <= 1.0 / (d as f64 + 3.0) + eps) {
            return Err(Error::InvalidConfig(alloc::format!("r'_h = {rh_prime} outside (0, 1/(d+3)]")));
        }
        if n < 2 {
            return Err(Error::InvalidDimension("bandwidth schedule needs n >= 2".into()));
        }
        Ok(BandwidthSchedule { c1, c3, rh, rh_prime, n })
    }

    /// Exponents at their upper bounds; `c1 = c3 = 2.34 * scale`.
    pub fn rule_of_thumb(n: usize, p: usize, d: usize, scale: f64) -> Result<Self> {
        let c = RULE_OF_THUMB * scale;
        Self::new(c, c, 1.0 / (p.max(3) as f64 + 6.0), 1.0 / (d as f64 + 3.0), n, p, d)
    }

    /// `c1 n^{-r_h}`, raised to the floor when it starts below it.
    pub fn h1(&self) -> f64 {
        (self.c1 * libm::pow(self.n as f64, -self.rh)).max(self.floor())
    }

    /// Contraction factor `r_n`.
    pub fn contraction(&self) -> f64 {
        libm::pow(self.n as f64, -self.rh / 2.0)
    }

    /// Floor `hbar`.
    pub fn floor(&self) -> f64 {
        self.c3 * libm::pow(self.n as f64, -self.rh_prime)
    }

    /// `bandwidth_at`: bandwidth at iteration `t >= 1` (`t = 0` is treated as 1).
    pub fn at(&self, t: usize) -> f64 {
        let (rn, floor) = (self.contraction(), self.floor());
        let mut h = self.h1();
        for _ in 1..t.max(1) {
            let next = (rn * h).max(floor);
            if next == h {
                break;
            }
            h = next;
        }
        h
    }
}
