//! Thin helpers over `nalgebra` for dense symmetric matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn sym_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !m.is_square() {
        return Err(Error::Domain(format!("eigendecomposition of a {}x{} matrix", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite entry in symmetric eigenproblem".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Solver(format!("symmetric eigensolver did not converge on {n}x{n} input")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

pub fn sym_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    Ok(sym_eigen(m)?.0)
}

/// `P M P` with `P = I - (1/n) 11ᵀ`, which restricts the quadratic form
/// to coefficient vectors summing to zero.
pub fn centered(m: &Matrix) -> Matrix {
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).sum() / n as f64).collect();
    let col_means: Vec<f64> = (0..n).map(|j| m.column(j).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    Matrix::from_fn(n, n, |i, j| m[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Largest absolute entry, at least `f64::MIN_POSITIVE`.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(f64::MIN_POSITIVE, |a, v| a.max(v.abs()))
}

/// `Y M Y` for a diagonal sign matrix `Y = diag(y)`.
pub fn label_conjugate(m: &Matrix, y: &[f64]) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| y[i] * y[j] * m[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let m = Matrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let (vals, vecs) = sym_eigen(&m).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vals));
        let back = &vecs * d * vecs.transpose();
        assert!((back - m).abs().max() < 1e-12);
    }

    #[test]
    fn centering_kills_constants() {
        let m = Matrix::from_fn(4, 4, |i, j| (i + j) as f64);
        let c = centered(&m);
        assert!(c.abs().max() < 1e-12);
    }
}
