//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Columns of a working copy of `A` are rotated pairwise until every pair is
//! orthogonal to working precision; the column norms are then the singular
//! values and the accumulated rotations form `V`. One-sided Jacobi is slow for
//! large square inputs but very accurate, and the solvers only factor tall
//! skinny matrices with a handful of columns.

use alloc::vec::Vec;

use crate::matrix::Matrix;
use crate::scalar::{dot_conj, norm_sqr, Scalar};
use crate::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `A = U · diag(σ) · V^H` with `r = min(rows, cols)` columns in `U` and `V`.
#[derive(Debug, Clone)]
pub struct Svd<S> {
    pub u: Matrix<S>,
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    pub v: Matrix<S>,
}

impl<S: Scalar> Svd<S> {
    pub fn reconstruct(&self) -> Matrix<S> {
        let mut us = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            for x in us.col_mut(j) {
                *x = x.scale(s);
            }
        }
        us.matmul(&self.v.adjoint())
    }
}

pub fn thin_svd<S: Scalar>(a: &Matrix<S>) -> Result<Svd<S>> {
    if a.rows() < a.cols() {
        let t = tall_svd(&a.adjoint())?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    tall_svd(a)
}

fn tall_svd<S: Scalar>(a: &Matrix<S>) -> Result<Svd<S>> {
    let (n, k) = a.shape();
    if !a.is_finite() {
        return Err(Error::SvdNoConvergence { rows: n, cols: k, sweeps: 0 });
    }
    let mut w = a.clone();
    let mut v = Matrix::<S>::identity(k);
    let mut norms: Vec<f64> = (0..k).map(|j| norm_sqr(w.col(j))).collect();

    // Rounding in a length-n dot product is about sqrt(n) ulps, so a
    // stricter test can cycle forever on converged columns.
    let tol = f64::EPSILON * libm::sqrt(n as f64).max(1.0);
    let mut converged = k < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::SvdNoConvergence { rows: n, cols: k, sweeps });
        }
        sweeps += 1;
        converged = true;
        for p in 0..k - 1 {
            for q in p + 1..k {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot_conj(w.col(p), w.col(q));
                let g = gamma.abs();
                if g <= tol * libm::sqrt(alpha) * libm::sqrt(beta) {
                    continue;
                }
                converged = false;
                // Phase that makes the cross term real: a_q <- a_q * conj(phase).
                let phase = gamma.scale(1.0 / g);
                let zeta = (beta - alpha) / (2.0 * g);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut w, p, q, c, s, phase);
                rotate(&mut v, p, q, c, s, phase);
                norms[p] = norm_sqr(w.col(p));
                norms[q] = norm_sqr(w.col(q));
            }
        }
    }

    let sigma: Vec<f64> = norms.iter().map(|&x| libm::sqrt(x)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    // Stable, so equal singular values keep their column order.
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap_or(core::cmp::Ordering::Equal));

    let mut u = Matrix::<S>::zeros(n, k);
    let mut vs = Matrix::<S>::zeros(k, k);
    let mut singular_values = Vec::with_capacity(k);
    let mut filled = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let s = sigma[src];
        singular_values.push(s);
        vs.col_mut(dst).copy_from_slice(v.col(src));
        if s > 0.0 && s.is_finite() {
            let inv = 1.0 / s;
            for (x, &y) in u.col_mut(dst).iter_mut().zip(w.col(src)) {
                *x = y.scale(inv);
            }
            filled.push(true);
        } else {
            filled.push(false);
        }
    }
    complete_basis(&mut u, &filled);
    Ok(Svd { u, singular_values, v: vs })
}

/// Columns `p, q` of `m` <- `[m_p, m_q · conj(phase)] · [[c, s], [-s, c]]`.
fn rotate<S: Scalar>(m: &mut Matrix<S>, p: usize, q: usize, c: f64, s: f64, phase: S) {
    let rows = m.rows();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    let ph = phase.conj();
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y * ph;
        *x = xp.scale(c) - yq.scale(s);
        *y = xp.scale(s) + yq.scale(c);
    }
}

/// Fills the columns of `u` flagged `false` with an orthonormal completion
/// drawn deterministically from the standard basis.
pub(crate) fn complete_basis<S: Scalar>(u: &mut Matrix<S>, filled: &[bool]) {
    let n = u.rows();
    let mut candidate = 0;
    for j in 0..u.cols() {
        if filled[j] {
            continue;
        }
        while candidate < n {
            let mut e = alloc::vec![S::zero(); n];
            e[candidate] = S::one();
            candidate += 1;
            for _ in 0..2 {
                for (i, &done) in filled.iter().enumerate() {
                    if (done || i < j) && i != j {
                        let c = dot_conj(u.col(i), &e);
                        for (ev, &uv) in e.iter_mut().zip(u.col(i)) {
                            *ev -= c * uv;
                        }
                    }
                }
            }
            let nrm = libm::sqrt(norm_sqr(&e));
            if nrm > 0.5 {
                for (x, &y) in u.col_mut(j).iter_mut().zip(&e) {
                    *x = y.scale(1.0 / nrm);
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::NormalRng;
    use num_complex::Complex64;

    #[test]
    fn identity_and_diagonal() {
        let s = thin_svd(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(s.singular_values, alloc::vec![1.0, 1.0, 1.0]);
        let d = thin_svd(&Matrix::diag(&[3.0, 0.0])).unwrap();
        assert_eq!(d.singular_values, alloc::vec![3.0, 0.0]);
        assert!(d.u.orthonormality_error() < 1e-15);
    }

    #[test]
    fn zero_matrix_gets_orthonormal_u() {
        let s = thin_svd(&Matrix::<f64>::zeros(4, 2)).unwrap();
        assert_eq!(s.singular_values, alloc::vec![0.0, 0.0]);
        assert!(s.u.orthonormality_error() < 1e-15);
    }

    #[test]
    fn wide_and_complex_inputs_reconstruct() {
        let mut rng = NormalRng::seed_from(7);
        let a: Matrix<Complex64> = rng.matrix(3, 6);
        let s = thin_svd(&a).unwrap();
        assert_eq!(s.u.shape(), (3, 3));
        assert_eq!(s.v.shape(), (6, 3));
        assert!(s.reconstruct().sub(&a).frobenius_norm() <= 1e-13 * a.frobenius_norm());
        assert!(s.v.orthonormality_error() < 1e-13);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_non_finite() {
        let a = Matrix::from_rows(&[&[f64::NAN, 1.0], &[0.0, 1.0]]);
        assert!(matches!(thin_svd(&a), Err(Error::SvdNoConvergence { .. })));
    }
}
