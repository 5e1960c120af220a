//! Deterministic sweeps of the structural invariants.

use imave::fit::{kernel_weights, l2_loss, local_linear_fit, update_b, LocalFit};
use imave::metrics::{classification_rate, rank_correlation_with};
use imave::{grassmann_normalize, Dataset, EtaMode, KernelFamily, KernelSpec, RankStatistic};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FAMILIES: [KernelFamily; 3] = [KernelFamily::Epanechnikov, KernelFamily::Biweight, KernelFamily::Gaussian];

/// Projector onto the column space of `m` by classical Gram-Schmidt.
pub fn gram_schmidt_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for c in 0..m.ncols() {
        let mut v: Vec<f64> = m.column(c).iter().copied().collect();
        for _ in 0..2 {
            for e in &q {
                let dot: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        q.push(v.into_iter().map(|a| a / norm).collect());
    }
    let p = m.nrows();
    DMatrix::from_fn(p, p, |r, c| q.iter().map(|e| e[r] * e[c]).sum())
}

pub fn well_conditioned(m: &DMatrix<f64>) -> bool {
    let sv = m.clone().svd(false, false).singular_values;
    sv.min() > 1e-3 * sv.max().max(1e-300)
}

pub struct GrassmannReport {
    pub orthonormality: f64,
    pub projector: f64,
    pub drift: f64,
}

/// Worst deviations over `count` random well-conditioned matrices.
pub fn grassmann(seed: u64, count: usize) -> GrassmannReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GrassmannReport { orthonormality: 0.0, projector: 0.0, drift: 0.0 };
    let mut done = 0;
    while done < count {
        let p = rng.random_range(1..=6);
        let d = rng.random_range(1..=p);
        let m = DMatrix::from_fn(p, d, |_, _| rng.random_range(-3.0..3.0));
        if !well_conditioned(&m) {
            continue;
        }
        done += 1;
        let b = grassmann_normalize(&m).unwrap();
        let gram = b.matrix().transpose() * b.matrix();
        let again = grassmann_normalize(b.matrix()).unwrap();
        report.orthonormality = report.orthonormality.max((gram - DMatrix::identity(d, d)).abs().max());
        report.projector = report.projector.max((b.projector() - gram_schmidt_projector(&m)).abs().max());
        report.drift = report.drift.max((again.matrix() - b.matrix()).abs().max());
    }
    report
}

/// Midpoint rule over the cube `[-r, r]^dim`.
pub fn integrate(spec: &KernelSpec, h: f64, r: f64, steps: usize) -> f64 {
    let dim = spec.dim();
    let step = 2.0 * r / steps as f64;
    let mut total = 0.0;
    let mut idx = vec![0usize; dim];
    loop {
        let u: Vec<f64> = idx.iter().map(|&k| -r + (k as f64 + 0.5) * step).collect();
        total += spec.eval(&u, h).unwrap();
        let mut k = 0;
        while k < dim {
            idx[k] += 1;
            if idx[k] < steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == dim {
            break;
        }
    }
    total * step.powi(dim as i32)
}

/// Largest `|integral of K_h - 1|` over the kernel families and `d <= 3`.
pub fn kernel_mass_error(h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for family in FAMILIES {
        for (dim, steps) in [(1, 4000), (2, 400), (3, 120)] {
            let r = if family.has_compact_support() { h } else { 7.0 * h };
            let total = integrate(&KernelSpec::new(family, dim), h, r, steps);
            worst = worst.max((total - 1.0).abs());
        }
    }
    worst
}

pub fn toy_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let t: Vec<i32> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let u: f64 = x[i * p..(i + 1) * p].iter().sum();
            0.5 * t[i] as f64 * 3.0 * u + rng.random_range(-1.0..1.0)
        })
        .collect();
    let pi = (0..n).map(|_| rng.random_range(0.3..0.7)).collect();
    Dataset::new(x, n, p, y, t, 2, Some(pi)).unwrap()
}

/// `L2` after minus before one index update with the local fits held
/// fixed, or `None` when some kernel window is too thin to fit.
pub fn l2_change(seed: u64, p: usize, h: f64) -> Option<f64> {
    let n = 30;
    let ds = toy_dataset(seed, n, p);
    let raw = DMatrix::from_fn(p, 1, |r, _| 1.0 + 0.3 * r as f64);
    let b = grassmann_normalize(&raw).unwrap();
    let w = kernel_weights(&ds, &b, KernelFamily::Epanechnikov, h).unwrap();
    if !(0..n).all(|j| w.column(j).iter().filter(|v| **v > 0.0).count() > 3) {
        return None;
    }
    let fits: Vec<LocalFit> =
        (0..n).map(|j| local_linear_fit(&ds, &b, j, &EtaMode::Zero, w.column(j).as_slice()).unwrap()).collect();
    let before = l2_loss(&ds, b.matrix(), &fits, &w, &EtaMode::Zero).unwrap();
    let next = update_b(&ds, &fits, &w, &EtaMode::Zero).unwrap();
    let after = l2_loss(&ds, &next, &fits, &w, &EtaMode::Zero).unwrap();
    Some(after - before)
}

/// Whether rank correlations survive increasing transforms and
/// classification rates survive positive scaling on `count` random inputs.
pub fn metric_invariances(seed: u64, count: usize) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).all(|_| {
        let n = rng.random_range(3..40);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + rng.random_range(-5.0..5.0)).collect();
        let ta: Vec<f64> = a.iter().map(|x| x.powi(3) + 2.0 * x).collect();
        let tb: Vec<f64> = b.iter().map(|x| (x / 3.0).exp()).collect();
        let scale = rng.random_range(1e-3..1e3);
        let scaled: Vec<f64> = a.iter().map(|v| v * scale).collect();
        let ranks = [RankStatistic::Spearman, RankStatistic::Kendall]
            .iter()
            .all(|&s| rank_correlation_with(&a, &b, s).ok() == rank_correlation_with(&ta, &tb, s).ok());
        ranks && classification_rate(&a, &b).unwrap() == classification_rate(&scaled, &b).unwrap()
    })
}
