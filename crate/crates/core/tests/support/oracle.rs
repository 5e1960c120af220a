//! Weighted least-squares solves against normal equations assembled term
//! by term and solved by Gaussian elimination.

use imave::data;
use imave::fit::{self, local_linear_fit, update_b, LocalFit};
use imave::{grassmann_normalize, Dataset, EtaMode, IndexMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves `a x = b` by elimination with partial pivoting.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let m = b.len();
    for c in 0..m {
        let piv = (c..m).max_by(|&r, &s| a[r][c].abs().total_cmp(&a[s][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..m {
            let f = a[r][c] / a[c][c];
            for k in c..m {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Weighted least squares `min sum w_i (z_i - rows_i . beta)^2` via the
/// normal equations.
fn wls(rows: &[Vec<f64>], z: &[f64], w: &[f64]) -> Vec<f64> {
    let q = rows[0].len();
    let mut a = vec![vec![0.0; q]; q];
    let mut b = vec![0.0; q];
    for ((row, &zi), &wi) in rows.iter().zip(z).zip(w) {
        for r in 0..q {
            b[r] += wi * row[r] * zi;
            for c in 0..q {
                a[r][c] += wi * row[r] * row[c];
            }
        }
    }
    gauss(a, b)
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let diff: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm.max(1.0)
}

/// `max` that lets a NaN error through as infinity.
fn worse(a: f64, b: f64) -> f64 {
    if b.is_nan() {
        f64::INFINITY
    } else {
        a.max(b)
    }
}

struct Instance {
    ds: Dataset,
    b: IndexMatrix,
    eta: Vec<f64>,
}

fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(8..=20);
    let p = rng.random_range(1..=4);
    let d = rng.random_range(1..=p);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut t: Vec<i32> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    t[0] = 1;
    t[1] = -1;
    let pi: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.8)).collect();
    let eta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let raw = DMatrix::from_fn(p, d, |_, _| rng.random_range(-1.0..1.0));
    Instance { ds: Dataset::new(x, n, p, y, t, 2, Some(pi)).unwrap(), b: grassmann_normalize(&raw).unwrap(), eta }
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(0.1..1.0))
}

fn projected(inst: &Instance, i: usize) -> Vec<f64> {
    let b = inst.b.matrix();
    (0..b.ncols()).map(|k| b.column(k).iter().zip(inst.ds.row(i)).map(|(a, c)| a * c).sum()).collect()
}

/// Largest relative error over `count` random instances.
pub fn local_fits(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let inst = instance(&mut rng);
        let (ds, n) = (&inst.ds, inst.ds.n());
        let w = weights(&mut rng, n);
        let j = rng.random_range(0..n);
        let col: Vec<f64> = w.column(j).iter().copied().collect();
        let fit = local_linear_fit(ds, &inst.b, j, &EtaMode::Fixed(inst.eta.clone()), &col).unwrap();

        let uj = projected(&inst, j);
        let mut rows = Vec::new();
        let mut z = Vec::new();
        let mut obs_w = Vec::new();
        for i in 0..n {
            let half_t = 0.5 * ds.t()[i] as f64;
            let ui = projected(&inst, i);
            let mut row = vec![half_t];
            row.extend(ui.iter().zip(&uj).map(|(a, c)| half_t * (a - c)));
            rows.push(row);
            z.push(ds.y()[i] - inst.eta[i]);
            obs_w.push(col[i] / ds.pi().unwrap()[i]);
        }
        let want = wls(&rows, &z, &obs_w);
        let mut got = vec![fit.value()];
        got.extend(fit.gradient().iter());
        worst = worse(worst, rel_err(&got, &want));
    }
    worst
}

/// Largest relative error over `count` random instances.
pub fn index_update(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let inst = instance(&mut rng);
        let (ds, n, p) = (&inst.ds, inst.ds.n(), inst.ds.p());
        let d = inst.b.d();
        let w = weights(&mut rng, n);
        let fits: Vec<LocalFit> = (0..n)
            .map(|_| LocalFit {
                a: DVector::from_element(1, rng.random_range(-2.0..2.0)),
                b: DMatrix::from_fn(1, d, |_, _| rng.random_range(-2.0..2.0)),
                degenerate: false,
            })
            .collect();
        let got = update_b(ds, &fits, &w, &EtaMode::Fixed(inst.eta.clone())).unwrap();

        // Unknowns are the entries B[(r, k)] stacked column by column.
        let mut rows = Vec::new();
        let mut z = Vec::new();
        let mut obs_w = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let half_t = 0.5 * ds.t()[i] as f64;
                let mut row = vec![0.0; p * d];
                for k in 0..d {
                    for r in 0..p {
                        row[k * p + r] = half_t * fits[j].b[(0, k)] * (ds.row(i)[r] - ds.row(j)[r]);
                    }
                }
                rows.push(row);
                z.push(ds.y()[i] - inst.eta[i] - half_t * fits[j].a[0]);
                obs_w.push(w[(i, j)] / ds.pi().unwrap()[i]);
            }
        }
        let want = wls(&rows, &z, &obs_w);
        let got: Vec<f64> = got.iter().copied().collect();
        worst = worse(worst, rel_err(&got, &want));
    }
    worst
}

/// Largest relative error over `count` random instances.
pub fn initial_regression(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let inst = instance(&mut rng);
        let (ds, n, p) = (&inst.ds, inst.ds.n(), inst.ds.p());
        let center: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let got = fit::initial_regression(ds, &EtaMode::Fixed(inst.eta.clone()), &center, &w).unwrap();

        let mut rows = Vec::new();
        let mut z = Vec::new();
        let mut obs_w = Vec::new();
        for i in 0..n {
            let half_t = 0.5 * ds.t()[i] as f64;
            let mut row = vec![half_t];
            row.extend(ds.row(i).iter().zip(&center).map(|(a, c)| half_t * (a - c)));
            rows.push(row);
            z.push(ds.y()[i] - inst.eta[i]);
            obs_w.push(w[i] / ds.pi().unwrap()[i]);
        }
        let want = wls(&rows, &z, &obs_w);
        let got: Vec<f64> = got.iter().copied().collect();
        worst = worse(worst, rel_err(&got, &want[1..]));
    }
    worst
}

/// Largest relative error over `count` random instances.
pub fn irls_step(seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n = rng.random_range(8..=20);
        let q = rng.random_range(1..=4) + 1;
        let design: Vec<f64> = (0..n * q).map(|k| if k % q == 0 { 1.0 } else { rng.random_range(-2.0..2.0) }).collect();
        let y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        let beta: Vec<f64> = (0..q).map(|_| rng.random_range(-0.5..0.5)).collect();
        let got = data::irls_step(&design, q, &y, &beta).unwrap();

        let rows: Vec<Vec<f64>> = design.chunks(q).map(<[f64]>::to_vec).collect();
        let mut z = Vec::new();
        let mut w = Vec::new();
        for (row, &yi) in rows.iter().zip(&y) {
            let lin: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-lin).exp());
            w.push(mu * (1.0 - mu));
            z.push(lin + (yi - mu) / (mu * (1.0 - mu)));
        }
        let want = wls(&rows, &z, &w);
        worst = worse(worst, rel_err(&got, &want));
    }
    worst
}
