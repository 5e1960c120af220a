//! Small dense helpers shared by the weighted least-squares solves.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Condition number above which a Gram matrix receives a ridge term.
pub const MAX_CONDITION: f64 = 1e12;

/// Outcome of a regularized normal-equation solve.
#[derive(Debug, Clone)]
pub struct GramSolution {
    pub coefficients: DVector<f64>,
    /// True when the ridge term `ridge * trace / dim` was added.
    pub regularized: bool,
}

/// Solves `gram * x = rhs` for a symmetric positive semi-definite `gram`.
///
/// When the eigenvalue ratio of `gram` exceeds [`MAX_CONDITION`] (or the
/// smallest eigenvalue is not positive) the system is shifted by
/// `ridge * trace(gram) / dim` before factoring.
pub fn solve_gram(gram: &DMatrix<f64>, rhs: &DVector<f64>, ridge: f64) -> Result<GramSolution> {
    let dim = gram.nrows();
    if dim == 0 {
        return Ok(GramSolution { coefficients: DVector::zeros(0), regularized: false });
    }
    let trace = gram.trace();
    if !trace.is_finite() || rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let eigenvalues = gram.clone().symmetric_eigenvalues();
    let max = eigenvalues.max();
    let min = eigenvalues.min();
    let ill = min <= 0.0 || max / min > MAX_CONDITION;
    let mut system = gram.clone();
    if ill {
        let shift = ridge * trace / dim as f64;
        if shift <= 0.0 || !shift.is_finite() {
            return Err(Error::RankDeficient);
        }
        for k in 0..dim {
            system[(k, k)] += shift;
        }
    }
    let chol = system.cholesky().ok_or(Error::RankDeficient)?;
    let coefficients = chol.solve(rhs);
    if coefficients.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    Ok(GramSolution { coefficients, regularized: ill })
}

/// Symmetric inverse square root of a positive definite matrix.
///
/// Fails with [`Error::RankDeficient`] when the smallest eigenvalue is at or
/// below `floor`.
pub fn inv_sqrt_spd(m: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > floor)) {
        return Err(Error::RankDeficient);
    }
    let scaled = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| 1.0 / libm::sqrt(*l)));
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&scaled) * q.transpose())
}

/// The `k` leading eigenvectors of a symmetric matrix, ordered by decreasing
/// eigenvalue, as the columns of a `dim x k` matrix.
pub fn leading_eigenvectors(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: alloc::vec::Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = DMatrix::zeros(m.nrows(), k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        out.set_column(col, &eig.eigenvectors.column(idx));
    }
    out
}

/// Sample standard deviation (divisor `n - 1`); zero for fewer than two values.
pub fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    libm::sqrt(ss / (n - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_well_conditioned_system_exactly() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = DVector::from_vec(alloc::vec![1.0, 2.0]);
        let sol = solve_gram(&g, &r, 1e-8).unwrap();
        assert!(!sol.regularized);
        let back = &g * &sol.coefficients;
        assert!((back - r).norm() < 1e-14);
    }

    #[test]
    fn singular_gram_gets_ridge() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let r = DVector::from_vec(alloc::vec![2.0, 0.0]);
        let sol = solve_gram(&g, &r, 1e-8).unwrap();
        assert!(sol.regularized);
        assert!((sol.coefficients[0] - 2.0).abs() < 1e-6);
        assert_eq!(sol.coefficients[1], 0.0);
    }

    #[test]
    fn inverse_square_root_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![4.0, 9.0]));
        let r = inv_sqrt_spd(&m, 0.0).unwrap();
        assert!((r[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((r[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
    }
}
