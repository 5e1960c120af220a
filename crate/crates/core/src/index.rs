//! Orthonormal index matrices and Grassmann normalization.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::inv_sqrt_spd;

/// Smallest singular value accepted by [`grassmann_normalize`].
pub const RANK_TOL: f64 = 1e-10;

/// A `p x d` matrix with orthonormal columns in canonical sign.
///
/// Only the column space is identified; the canonical sign makes the entry
/// of largest magnitude in every column (first one on ties) nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndexMatrixRepr", into = "IndexMatrixRepr")]
pub struct IndexMatrix {
    b: DMatrix<f64>,
}

/// Row-major wire representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexMatrixRepr {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl TryFrom<IndexMatrixRepr> for IndexMatrix {
    type Error = Error;

    fn try_from(r: IndexMatrixRepr) -> Result<Self> {
        if r.rows * r.cols != r.data.len() || r.cols == 0 {
            return Err(Error::DimensionMismatch("index matrix data length".into()));
        }
        Ok(IndexMatrix { b: DMatrix::from_row_slice(r.rows, r.cols, &r.data) })
    }
}

impl From<IndexMatrix> for IndexMatrixRepr {
    fn from(m: IndexMatrix) -> Self {
        IndexMatrixRepr { rows: m.b.nrows(), cols: m.b.ncols(), data: m.b.transpose().iter().copied().collect() }
    }
}

impl IndexMatrix {
    /// Wraps a matrix that is already orthonormal without renormalizing.
    ///
    /// Fails if `B^T B` differs from the identity by more than `1e-10`.
    pub fn from_orthonormal(b: DMatrix<f64>) -> Result<Self> {
        let d = b.ncols();
        let err = (b.transpose() * &b - DMatrix::<f64>::identity(d, d)).amax();
        if d == 0 || !(err <= 1e-10) {
            return Err(Error::RankDeficient);
        }
        let mut b = b;
        canonicalize_signs(&mut b);
        Ok(IndexMatrix { b })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.b
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }

    pub fn d(&self) -> usize {
        self.b.ncols()
    }

    /// Column-space projector `B B^T`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.b * self.b.transpose()
    }

    /// `B^T x` written into `out`.
    #[inline]
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.b.column(k).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Row-major `n x d` projections of row-major `n x p` data.
    pub fn project_rows(&self, x: &[f64]) -> Vec<f64> {
        let (p, d) = (self.p(), self.d());
        let n = x.len() / p;
        let mut out = alloc::vec![0.0; n * d];
        for i in 0..n {
            self.project_into(&x[i * p..(i + 1) * p], &mut out[i * d..(i + 1) * d]);
        }
        out
    }

    /// Frobenius distance between column-space projectors.
    pub fn subspace_distance(&self, other: &DMatrix<f64>) -> f64 {
        subspace_distance(&self.b, other)
    }
}

/// `||B1 B1^T - B2 B2^T||_F` for matrices with orthonormal columns.
pub fn subspace_distance(b1: &DMatrix<f64>, b2: &DMatrix<f64>) -> f64 {
    (b1 * b1.transpose() - b2 * b2.transpose()).norm()
}

fn canonicalize_signs(b: &mut DMatrix<f64>) {
    for mut col in b.column_iter_mut() {
        let mut best = 0;
        for (r, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = r;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// `B (B^T B)^{-1/2}` followed by sign canonicalization.
pub fn grassmann_normalize(btilde: &DMatrix<f64>) -> Result<IndexMatrix> {
    if btilde.ncols() == 0 || btilde.ncols() > btilde.nrows() {
        return Err(Error::RankDeficient);
    }
    if btilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let gram = btilde.transpose() * btilde;
    let mut b = btilde * inv_sqrt_spd(&gram, RANK_TOL * RANK_TOL)?;
    // A second pass removes the rounding left by an ill-conditioned input.
    let gram = b.transpose() * &b;
    b = &b * inv_sqrt_spd(&gram, RANK_TOL * RANK_TOL)?;
    canonicalize_signs(&mut b);
    Ok(IndexMatrix { b })
}

/// Like [`grassmann_normalize`], except that directions missing from a
/// rank-deficient `btilde` are taken from `previous`, in column order.
pub(crate) fn normalize_or_complete(btilde: &DMatrix<f64>, previous: &IndexMatrix) -> Result<IndexMatrix> {
    match grassmann_normalize(btilde) {
        Err(Error::RankDeficient) if btilde.ncols() == previous.d() && btilde.nrows() == previous.p() => {}
        other => return other,
    }
    let d = btilde.ncols();
    let scale = btilde.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d);
    let candidates = btilde
        .column_iter()
        .map(|c| (c.into_owned(), scale))
        .chain(previous.matrix().column_iter().map(|c| (c.into_owned(), 1.0)));
    for (mut v, reference) in candidates {
        if basis.len() == d || !v.iter().all(|x| x.is_finite()) {
            continue;
        }
        for _ in 0..2 {
            for e in &basis {
                let dot = e.dot(&v);
                v.axpy(-dot, e, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 * reference {
            basis.push(v / norm);
        }
    }
    if basis.len() < d {
        return Err(Error::RankDeficient);
    }
    grassmann_normalize(&DMatrix::from_columns(&basis))
}
