use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::Matrix;
use crate::scalar::{dot_conj, norm_sqr, Scalar};
use crate::tensor::Tensor;

const POWER_MAX_ITERS: usize = 300;
const POWER_RTOL: f64 = 1e-6;

/// Matrix-free access to a linear map, enough for norm estimation.
pub trait LinearOperator<S: Scalar> {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A x`
    fn apply(&self, x: &[S]) -> Vec<S>;
    /// `A^H y`
    fn apply_adjoint(&self, y: &[S]) -> Vec<S>;
    /// Maximum absolute column sum.
    fn norm_one(&self) -> f64;
    /// Maximum absolute row sum.
    fn norm_inf(&self) -> f64;
    /// The column of largest Euclidean norm, used to start power iteration.
    fn largest_column(&self) -> Vec<S>;
}

impl<S: Scalar> LinearOperator<S> for Matrix<S> {
    fn nrows(&self) -> usize {
        self.rows()
    }

    fn ncols(&self) -> usize {
        self.cols()
    }

    fn apply(&self, x: &[S]) -> Vec<S> {
        let mut y = vec![S::zero(); self.rows()];
        for (j, &xj) in x.iter().enumerate() {
            for (yi, &a) in y.iter_mut().zip(self.col(j)) {
                *yi += a * xj;
            }
        }
        y
    }

    fn apply_adjoint(&self, y: &[S]) -> Vec<S> {
        (0..self.cols()).map(|j| dot_conj(self.col(j), y)).collect()
    }

    fn norm_one(&self) -> f64 {
        Matrix::norm_one(self)
    }

    fn norm_inf(&self) -> f64 {
        Matrix::norm_inf(self)
    }

    fn largest_column(&self) -> Vec<S> {
        let best = (0..self.cols())
            .map(|j| norm_sqr(self.col(j)))
            .enumerate()
            .fold((0, -1.0), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
        if self.cols() == 0 {
            return vec![S::zero(); self.rows()];
        }
        self.col(best.0).to_vec()
    }
}

/// The mode-`mode` unfolding of a tensor, viewed without copying.
#[derive(Debug, Clone, Copy)]
pub struct Unfolding<'a, S> {
    tensor: &'a Tensor<S>,
    mode: usize,
    left: usize,
    n: usize,
    right: usize,
}

impl<'a, S: Scalar> Unfolding<'a, S> {
    pub fn new(tensor: &'a Tensor<S>, mode: usize) -> crate::Result<Self> {
        let dims = tensor.dims();
        if mode >= dims.len() {
            return Err(crate::Error::ModeOutOfRange { mode, order: dims.len() });
        }
        Ok(Unfolding {
            tensor,
            mode,
            left: dims[..mode].iter().product(),
            n: dims[mode],
            right: dims[mode + 1..].iter().product(),
        })
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    #[inline]
    fn entry(&self, i: usize, l: usize, r: usize) -> S {
        self.tensor.as_slice()[l + self.left * (i + self.n * r)]
    }
}

impl<S: Scalar> LinearOperator<S> for Unfolding<'_, S> {
    fn nrows(&self) -> usize {
        self.n
    }

    fn ncols(&self) -> usize {
        self.left * self.right
    }

    fn apply(&self, x: &[S]) -> Vec<S> {
        let mut y = vec![S::zero(); self.n];
        for r in 0..self.right {
            for (i, yi) in y.iter_mut().enumerate() {
                for l in 0..self.left {
                    *yi += self.entry(i, l, r) * x[l + self.left * r];
                }
            }
        }
        y
    }

    fn apply_adjoint(&self, y: &[S]) -> Vec<S> {
        let mut z = vec![S::zero(); self.left * self.right];
        for r in 0..self.right {
            for (i, &yi) in y.iter().enumerate() {
                for l in 0..self.left {
                    z[l + self.left * r] += self.entry(i, l, r).conj() * yi;
                }
            }
        }
        z
    }

    fn norm_one(&self) -> f64 {
        let mut best = 0.0f64;
        for r in 0..self.right {
            for l in 0..self.left {
                let s: f64 = (0..self.n).map(|i| self.entry(i, l, r).abs()).sum();
                best = best.max(s);
            }
        }
        best
    }

    fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for r in 0..self.right {
            for (i, s) in sums.iter_mut().enumerate() {
                for l in 0..self.left {
                    *s += self.entry(i, l, r).abs();
                }
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    fn largest_column(&self) -> Vec<S> {
        let mut best = (0, 0, -1.0);
        for r in 0..self.right {
            for l in 0..self.left {
                let s: f64 = (0..self.n).map(|i| self.entry(i, l, r).abs_sqr()).sum();
                if s > best.2 {
                    best = (l, r, s);
                }
            }
        }
        (0..self.n).map(|i| self.entry(i, best.0, best.1)).collect()
    }
}

/// Rough estimate of `|A|_2`, used only to normalize KKT residuals.
///
/// Power iteration on `A A^H` (at most 300 steps, stopping once the estimate
/// moves by less than 1e-6 relative), capped by `sqrt(|A|_1 |A|_inf)`, which
/// is always an upper bound. The power value never exceeds the true norm.
pub fn spectral_norm_estimate<S: Scalar>(a: &impl LinearOperator<S>) -> f64 {
    let bound = libm::sqrt(a.norm_one() * a.norm_inf());
    if bound == 0.0 {
        return 0.0;
    }
    let mut u = a.largest_column();
    let mut nu = libm::sqrt(norm_sqr(&u));
    if nu == 0.0 {
        return bound;
    }
    let mut sigma = 0.0;
    for it in 0..POWER_MAX_ITERS {
        for x in u.iter_mut() {
            *x = x.scale(1.0 / nu);
        }
        let y = a.apply_adjoint(&u);
        let next = libm::sqrt(norm_sqr(&y));
        let done = it > 0 && libm::fabs(next - sigma) <= POWER_RTOL * next;
        sigma = next;
        if done || sigma == 0.0 {
            break;
        }
        u = a.apply(&y);
        nu = libm::sqrt(norm_sqr(&u));
        if nu == 0.0 {
            break;
        }
    }
    sigma.min(bound)
}
