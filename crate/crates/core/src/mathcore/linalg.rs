//! Cholesky factorization and SPD solves, backed by nalgebra.

use nalgebra::{DMatrix, DVector};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Extra diagonal loadings tried after the caller's jitter, as multiples of
/// the mean diagonal.
const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

const SYMMETRY_TOL: f64 = 1e-9;

/// Lower-triangular factor `L` with `L·Lᵀ = A + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    factor: Matrix,
    l: DMatrix<f64>,
    jitter: f64,
}

impl Cholesky {
    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    /// Total diagonal loading that was needed for the factorization to succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    /// Solves `(L·Lᵀ) x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let z = self.solve_lower(b)?;
        let x = self
            .l
            .tr_solve_lower_triangular(&DVector::from_vec(z))
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(x.as_slice().to_vec())
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), b.len())?;
        let z = self
            .l
            .solve_lower_triangular(&DVector::from_column_slice(b))
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(z.as_slice().to_vec())
    }

    /// `Σ ln L_ii`, i.e. half the log-determinant of the factored matrix.
    pub fn half_log_det(&self) -> f64 {
        self.l.diagonal().iter().map(|d| d.ln()).sum()
    }

    pub fn into_factor(self) -> Matrix {
        self.factor
    }
}

fn check_len(n: usize, len: usize) -> Result<()> {
    if n != len {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: len,
        });
    }
    Ok(())
}

/// Factors a symmetric positive-definite matrix, escalating the diagonal
/// loading through 1e-10, 1e-8, 1e-6 (× mean diagonal) when the plain
/// factorization breaks down.
pub fn cholesky_decompose(a: &Matrix, jitter: f64) -> Result<Cholesky> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            n,
            a.cols()
        )));
    }
    if !(jitter >= 0.0) {
        return Err(Error::ShapeMismatch(format!("negative jitter {jitter}")));
    }
    let scale = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (a.get(i, j) - a.get(j, i)).abs() > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::ShapeMismatch(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    if let Some(c) = try_factor(a, jitter) {
        return Ok(c);
    }
    let mean_diag = if n == 0 {
        0.0
    } else {
        (0..n).map(|i| a.get(i, i)).sum::<f64>() / n as f64
    };
    if !(mean_diag > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    for step in JITTER_LADDER {
        if let Some(c) = try_factor(a, jitter + step * mean_diag) {
            return Ok(c);
        }
    }
    Err(Error::NotPositiveDefinite)
}

fn try_factor(a: &Matrix, jitter: f64) -> Option<Cholesky> {
    let n = a.rows();
    let loaded = DMatrix::from_fn(n, n, |i, j| a.get(i, j) + if i == j { jitter } else { 0.0 });
    let l = nalgebra::Cholesky::new(loaded)?.unpack();
    if !l.iter().all(|v| v.is_finite()) {
        return None;
    }
    let factor = Matrix::from_vec(n, n, l.transpose().as_slice().to_vec()).ok()?;
    Some(Cholesky { factor, l, jitter })
}

fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Solves `(L·Lᵀ) x = b` for a lower-triangular `L`.
pub fn solve_spd(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let z = forward_substitute(l, b)?;
    backward_substitute_transposed(l, &z)
}

/// Solves `L z = b`.
pub fn forward_substitute(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if l.cols() != l.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} factor",
            l.rows(),
            l.cols()
        )));
    }
    check_len(l.rows(), b.len())?;
    let z = to_dmatrix(l)
        .solve_lower_triangular(&DVector::from_column_slice(b))
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(z.as_slice().to_vec())
}

/// Solves `Lᵀ x = z`.
pub fn backward_substitute_transposed(l: &Matrix, z: &[f64]) -> Result<Vec<f64>> {
    if l.cols() != l.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} factor",
            l.rows(),
            l.cols()
        )));
    }
    check_len(l.rows(), z.len())?;
    let x = to_dmatrix(l)
        .tr_solve_lower_triangular(&DVector::from_column_slice(z))
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(x.as_slice().to_vec())
}
