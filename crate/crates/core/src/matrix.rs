//! Column-major dense matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut, Range};

use num_complex::Complex64;

use crate::scalar::{axpy, dot_conj, norm_sqr, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::identity_columns(n, n)
    }

    /// The first `cols` columns of the `rows × rows` identity.
    pub fn identity_columns(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..rows.min(cols) {
            m[(j, j)] = S::one();
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::mismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Row-major nested literal, convenient in tests.
    pub fn from_rows(rows: &[&[S]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn diag(values: &[S]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[S] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [S] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Contiguous column slice `[:, range]`.
    pub fn columns(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.cols, "column range out of bounds");
        Matrix {
            rows: self.rows,
            cols: range.len(),
            data: self.data[range.start * self.rows..range.end * self.rows].to_vec(),
        }
    }

    /// Writes `src` into the columns starting at `start`.
    pub fn set_columns(&mut self, start: usize, src: &Matrix<S>) {
        assert_eq!(src.rows, self.rows);
        assert!(start + src.cols <= self.cols);
        self.data[start * self.rows..(start + src.cols) * self.rows].copy_from_slice(&src.data);
    }

    /// Horizontal concatenation. All parts must share the row count.
    pub fn hcat(parts: &[&Matrix<S>]) -> Result<Self> {
        let rows = match parts.first() {
            Some(p) => p.rows,
            None => return Ok(Self::zeros(0, 0)),
        };
        if let Some(p) = parts.iter().find(|p| p.rows != rows) {
            return Err(Error::mismatch(format!(
                "hcat of {} and {} rows",
                rows, p.rows
            )));
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix<S>) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (l, &b) in rhs.col(j).iter().enumerate() {
                if b != S::zero() {
                    axpy(b, self.col(l), dst);
                }
            }
        }
        out
    }

    /// `self^H * rhs` without forming the adjoint.
    pub fn adjoint_mul(&self, rhs: &Matrix<S>) -> Self {
        assert_eq!(self.rows, rhs.rows, "adjoint_mul shape mismatch");
        Self::from_fn(self.cols, rhs.cols, |i, j| dot_conj(self.col(i), rhs.col(j)))
    }

    pub fn add(&self, rhs: &Matrix<S>) -> Self {
        assert_eq!(self.shape(), rhs.shape());
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, rhs: &Matrix<S>) -> Self {
        assert_eq!(self.shape(), rhs.shape());
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.scale(factor)).collect(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.norm_sqr())
    }

    pub fn trace(&self) -> S {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `Re tr(self^H rhs)`, the real inner product of equally shaped matrices.
    pub fn inner_re(&self, rhs: &Matrix<S>) -> f64 {
        assert_eq!(self.shape(), rhs.shape());
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| (a.conj() * b).re())
            .sum()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| self.col(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.rows];
        for j in 0..self.cols {
            for (s, v) in sums.iter_mut().zip(self.col(j)) {
                *s += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// `|self^H self - I|_F`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.adjoint_mul(self);
        let mut err = 0.0;
        for j in 0..g.cols {
            for i in 0..g.rows {
                let target = if i == j { S::one() } else { S::zero() };
                err += (g[(i, j)] - target).abs_sqr();
            }
        }
        libm::sqrt(err)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Matrix<f64> {
    /// Promotes a real matrix to the complex field.
    pub fn to_complex(&self) -> Matrix<Complex64> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_and_adjoint_agree() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let b = Matrix::from_rows(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, 1.0]]);
        let ab = a.matmul(&b);
        assert_eq!(ab, Matrix::from_rows(&[&[1.0, 2.0, 4.0], &[3.0, 4.0, 10.0], &[5.0, 6.0, 16.0]]));
        assert_eq!(a.adjoint_mul(&a), a.adjoint().matmul(&a));
    }

    #[test]
    fn complex_adjoint_conjugates() {
        let a = Matrix::from_rows(&[&[Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0)]]);
        let h = a.adjoint();
        assert_eq!(h.shape(), (2, 1));
        assert_eq!(h[(0, 0)], Complex64::new(1.0, -2.0));
        assert_eq!(h[(1, 0)], Complex64::new(0.0, 1.0));
    }

    #[test]
    fn norms_of_small_matrix() {
        let a = Matrix::from_rows(&[&[1.0, -2.0], &[3.0, 4.0]]);
        assert_eq!(a.norm_one(), 6.0);
        assert_eq!(a.norm_inf(), 7.0);
        assert_eq!(a.norm_sqr(), 30.0);
    }

    #[test]
    fn hcat_rejects_row_mismatch() {
        let a = Matrix::<f64>::zeros(2, 1);
        let b = Matrix::<f64>::zeros(3, 1);
        assert!(Matrix::hcat(&[&a, &b]).is_err());
    }
}
