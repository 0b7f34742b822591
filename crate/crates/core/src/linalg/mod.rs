//! Dense matrix kernels used by the solvers.

mod operator;
mod svd;

use alloc::vec::Vec;

pub use operator::{spectral_norm_estimate, LinearOperator, Unfolding};
pub use svd::{thin_svd, Svd};

use crate::matrix::Matrix;
use crate::scalar::{norm_sqr, Scalar};
use crate::{Error, Result};

/// `A = Q · H` with `Q` orthonormal and `H` Hermitian positive semidefinite.
#[derive(Debug, Clone)]
pub struct Polar<S> {
    pub q: Matrix<S>,
    pub h: Matrix<S>,
    /// Singular values of `A`, nonincreasing; their sum is the trace norm.
    pub singular_values: Vec<f64>,
}

impl<S: Scalar> Polar<S> {
    pub fn trace_norm(&self) -> f64 {
        self.singular_values.iter().sum()
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }
}

/// Orthonormal polar factor of a tall `n × k` matrix (`n ≥ k`) via the thin SVD.
///
/// For rank-deficient input the factor is not unique; the SVD completes the
/// missing left singular directions deterministically.
pub fn polar_factor<S: Scalar>(a: &Matrix<S>) -> Result<Polar<S>> {
    if a.rows() < a.cols() {
        return Err(Error::mismatch(alloc::format!(
            "polar factor needs rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let svd = thin_svd(a)?;
    let q = svd.u.matmul(&svd.v.adjoint());
    let mut vs = svd.v.clone();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        for x in vs.col_mut(j) {
            *x = x.scale(s);
        }
    }
    let h = sym(&vs.matmul(&svd.v.adjoint()))?;
    Ok(Polar { q, h, singular_values: svd.singular_values })
}

/// Sum of singular values.
pub fn trace_norm<S: Scalar>(a: &Matrix<S>) -> Result<f64> {
    Ok(thin_svd(a)?.singular_values.iter().sum())
}

/// Hermitian part `(A + A^H) / 2`.
pub fn sym<S: Scalar>(a: &Matrix<S>) -> Result<Matrix<S>> {
    if a.rows() != a.cols() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    Ok(Matrix::from_fn(a.rows(), a.cols(), |i, j| {
        (a[(i, j)] + a[(j, i)].conj()).scale(0.5)
    }))
}

/// Returns `[P, S']`, where `S'` is an orthonormal basis for the part of
/// `range(S)` orthogonal to `range(P)`.
///
/// The projection `S <- S - P (P^H S)` followed by orthonormalization is done
/// twice. The first `k` output columns are a bitwise copy of `P`. Directions
/// that collapse under projection are dropped, so the output has between `k`
/// and `k + p` columns.
pub fn orth_complement_extend<S: Scalar>(p: &Matrix<S>, s: &Matrix<S>) -> Result<Matrix<S>> {
    if p.rows() != s.rows() {
        return Err(Error::mismatch(alloc::format!(
            "basis has {} rows, extension has {}",
            p.rows(),
            s.rows()
        )));
    }
    let n = p.rows();
    // Column scaling leaves the range unchanged and lets one absolute
    // threshold decide which directions survive.
    let cols: Vec<usize> = (0..s.cols()).filter(|&j| norm_sqr(s.col(j)) > 0.0).collect();
    let mut w = Matrix::from_fn(n, cols.len(), |i, j| {
        let c = s.col(cols[j]);
        c[i].scale(1.0 / libm::sqrt(norm_sqr(c)))
    });
    let tol = 8.0 * f64::EPSILON * (n.max(s.cols()).max(1) as f64);
    for _ in 0..2 {
        if w.cols() == 0 {
            break;
        }
        let proj = p.matmul(&p.adjoint_mul(&w));
        w = w.sub(&proj);
        w = orth(&w, tol)?;
    }
    Matrix::hcat(&[p, &w])
}

/// Orthonormal basis of `range(a)` keeping singular directions above `tol`.
fn orth<S: Scalar>(a: &Matrix<S>, tol: f64) -> Result<Matrix<S>> {
    let svd = thin_svd(a)?;
    let r = svd.singular_values.iter().take_while(|&&s| s > tol).count();
    Ok(svd.u.columns(0..r))
}

/// `|sin Θ(range(P1), range(P2))|_F = sqrt(k - |P1^H P2|_F^2)` for orthonormal inputs.
pub fn sin_theta_frob<S: Scalar>(p1: &Matrix<S>, p2: &Matrix<S>) -> Result<f64> {
    if p1.shape() != p2.shape() {
        return Err(Error::mismatch(alloc::format!(
            "{}x{} vs {}x{}",
            p1.rows(),
            p1.cols(),
            p2.rows(),
            p2.cols()
        )));
    }
    let c = p1.adjoint_mul(p2).norm_sqr();
    Ok(libm::sqrt((p1.cols() as f64 - c).max(0.0)))
}
