//! Dense m-mode tensors in colexicographic order (first index fastest).
//!
//! The mode-ℓ unfolding is the `n_ℓ × N/n_ℓ` matrix of mode-ℓ fibers whose
//! columns run colexicographically over the remaining indices. With this
//! ordering, `unfold(B ×_ℓ X, ℓ) == X · unfold(B, ℓ)` holds exactly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::matrix::Matrix;
use crate::scalar::{axpy, dot_conj, norm_sqr, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    dims: Vec<usize>,
    data: Vec<S>,
}

/// Sizes of the index groups before and after `mode`.
#[inline]
fn split(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = dims[..mode].iter().product();
    let right = dims[mode + 1..].iter().product();
    (left, dims[mode], right)
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidShape(format!(
            "a tensor needs at least 2 modes, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidShape(format!("zero extent in {dims:?}")));
    }
    Ok(())
}

impl<S: Scalar> Tensor<S> {
    pub fn new(dims: Vec<usize>, data: Vec<S>) -> Result<Self> {
        check_dims(&dims)?;
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::InvalidShape(format!(
                "{} entries for dims {dims:?} (expected {n})",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Tensor {
            dims: dims.to_vec(),
            data: vec![S::zero(); dims.iter().product()],
        })
    }

    /// Builds a tensor entry by entry from its subscripts.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> S) -> Result<Self> {
        check_dims(dims)?;
        let n: usize = dims.iter().product();
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for (i, d) in idx.iter_mut().zip(dims) {
                *i += 1;
                if *i < *d {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Tensor { dims: dims.to_vec(), data })
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes `m`.
    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    /// Flat colexicographic position of a subscript tuple.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        flat_index(&self.dims, idx)
    }

    pub fn get(&self, idx: &[usize]) -> S {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: S) {
        let k = self.flat_index(idx);
        self.data[k] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange { mode, order: self.order() });
        }
        Ok(())
    }

    /// Mode-`mode` unfolding.
    pub fn unfold(&self, mode: usize) -> Result<Matrix<S>> {
        self.check_mode(mode)?;
        let (left, n, right) = split(&self.dims, mode);
        let mut out = Matrix::zeros(n, left * right);
        let dst = out.as_mut_slice();
        for r in 0..right {
            for i in 0..n {
                let src = &self.data[left * (i + n * r)..left * (i + n * r + 1)];
                for (l, &v) in src.iter().enumerate() {
                    dst[i + n * (l + left * r)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`Tensor::unfold`].
    pub fn fold(matrix: &Matrix<S>, dims: &[usize], mode: usize) -> Result<Self> {
        let mut out = Self::zeros(dims)?;
        out.check_mode(mode)?;
        let (left, n, right) = split(dims, mode);
        if matrix.shape() != (n, left * right) {
            return Err(Error::mismatch(format!(
                "cannot fold a {}x{} matrix into {dims:?} along mode {mode}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let src = matrix.as_slice();
        for r in 0..right {
            for i in 0..n {
                for l in 0..left {
                    out.data[l + left * (i + n * r)] = src[i + n * (l + left * r)];
                }
            }
        }
        Ok(out)
    }

    /// `self ×_mode x`: contracts column index of `x` against `mode`.
    pub fn mode_multiply(&self, x: &Matrix<S>, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let (left, n, right) = split(&self.dims, mode);
        if x.cols() != n {
            return Err(Error::mismatch(format!(
                "mode-{mode} product needs {n} columns, matrix is {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        let rows = x.rows();
        let mut dims = self.dims.clone();
        dims[mode] = rows;
        let mut data = vec![S::zero(); left * rows * right];
        if left == 1 {
            for r in 0..right {
                let src = &self.data[n * r..n * (r + 1)];
                let dst = &mut data[rows * r..rows * (r + 1)];
                for (j, &b) in src.iter().enumerate() {
                    if b != S::zero() {
                        axpy(b, x.col(j), dst);
                    }
                }
            }
        } else {
            for r in 0..right {
                for j in 0..n {
                    let src = &self.data[left * (j + n * r)..left * (j + n * r + 1)];
                    for i in 0..rows {
                        let xij = x[(i, j)];
                        if xij != S::zero() {
                            let off = left * (i + rows * r);
                            axpy(xij, src, &mut data[off..off + left]);
                        }
                    }
                }
            }
        }
        Ok(Tensor { dims, data })
    }

    /// `self ×_mode p^H` for an `n_mode × k` matrix `p`, without forming `p^H`.
    pub fn mode_multiply_adjoint(&self, p: &Matrix<S>, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let (left, n, right) = split(&self.dims, mode);
        if p.rows() != n {
            return Err(Error::mismatch(format!(
                "adjoint mode-{mode} product needs {n} rows, matrix is {}x{}",
                p.rows(),
                p.cols()
            )));
        }
        let k = p.cols();
        let mut dims = self.dims.clone();
        dims[mode] = k;
        let mut data = vec![S::zero(); left * k * right];
        if left == 1 {
            for r in 0..right {
                let fiber = &self.data[n * r..n * (r + 1)];
                for i in 0..k {
                    data[i + k * r] = dot_conj(p.col(i), fiber);
                }
            }
        } else {
            for r in 0..right {
                for i in 0..k {
                    let pc = p.col(i);
                    let off = left * (i + k * r);
                    for (j, &pji) in pc.iter().enumerate() {
                        if pji != S::zero() {
                            let src = &self.data[left * (j + n * r)..left * (j + n * r + 1)];
                            axpy(pji.conj(), src, &mut data[off..off + left]);
                        }
                    }
                }
            }
        }
        Ok(Tensor { dims, data })
    }

    /// Applies `(matrix, mode)` products in sequence. Modes must be distinct.
    pub fn multi_mode_multiply(&self, factors: &[(&Matrix<S>, usize)]) -> Result<Self> {
        for (i, (_, mode)) in factors.iter().enumerate() {
            self.check_mode(*mode)?;
            if factors[..i].iter().any(|(_, m)| m == mode) {
                return Err(Error::DuplicateMode(*mode));
            }
        }
        let mut out = self.clone();
        for &(x, mode) in factors {
            out = out.mode_multiply(x, mode)?;
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Tensor<S>) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Tensor<S>) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v.scale(factor)).collect(),
        }
    }

    fn zip_with(&self, rhs: &Tensor<S>, f: impl Fn(S, S) -> S) -> Result<Self> {
        if self.dims != rhs.dims {
            return Err(Error::mismatch(format!("{:?} vs {:?}", self.dims, rhs.dims)));
        }
        Ok(Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

impl Tensor<f64> {
    pub fn to_complex(&self) -> Tensor<Complex64> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

impl Tensor<Complex64> {
    /// Mixed-field product: a real matrix applied to a complex tensor.
    pub fn mode_multiply_real(&self, x: &Matrix<f64>, mode: usize) -> Result<Self> {
        self.mode_multiply(&x.to_complex(), mode)
    }
}

/// Frobenius norm `sqrt(sum |b|^2)`.
pub fn frobenius_norm<S: Scalar>(b: &Tensor<S>) -> f64 {
    libm::sqrt(b.norm_sqr())
}

/// Colexicographic flat index.
pub fn flat_index(dims: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), idx.len());
    let mut k = 0;
    let mut stride = 1;
    for (&i, &d) in idx.iter().zip(dims) {
        debug_assert!(i < d);
        k += i * stride;
        stride *= d;
    }
    k
}

/// Inverse of [`flat_index`].
pub fn subscripts(dims: &[usize], mut flat: usize) -> Vec<usize> {
    dims.iter()
        .map(|&d| {
            let i = flat % d;
            flat /= d;
            i
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_to_eight() -> Tensor<f64> {
        Tensor::new(vec![2, 2, 2], (1..=8).map(f64::from).collect()).unwrap()
    }

    fn sum_of_squares_oracle(t: &Tensor<f64>) -> f64 {
        let mut s = 0.0;
        for &v in t.as_slice() {
            s += v * v;
        }
        s.sqrt()
    }

    #[test]
    fn frobenius_norm_cases() {
        assert_eq!(Tensor::<f64>::zeros(&[3, 2, 4]).unwrap().frobenius_norm(), 0.0);
        let t = one_to_eight();
        assert_eq!(t.frobenius_norm(), sum_of_squares_oracle(&t));
        assert_eq!(t.frobenius_norm(), 204f64.sqrt());
        let c = Tensor::new(vec![1, 1, 1], vec![Complex64::new(3.0, 4.0)]).unwrap();
        assert_eq!(c.frobenius_norm(), 5.0);
    }

    #[test]
    fn unfold_enumerates_fibers() {
        let t = one_to_eight();
        let u0 = t.unfold(0).unwrap();
        assert_eq!(u0, Matrix::from_rows(&[&[1.0, 3.0, 5.0, 7.0], &[2.0, 4.0, 6.0, 8.0]]));
        let u1 = t.unfold(1).unwrap();
        assert_eq!(u1, Matrix::from_rows(&[&[1.0, 2.0, 5.0, 6.0], &[3.0, 4.0, 7.0, 8.0]]));
        let u2 = t.unfold(2).unwrap();
        assert_eq!(u2, Matrix::from_rows(&[&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]]));
        assert!(matches!(t.unfold(3), Err(Error::ModeOutOfRange { mode: 3, order: 3 })));
    }

    #[test]
    fn mode_multiply_triple_loop_example() {
        let t = one_to_eight();
        let x = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let r = t.mode_multiply(&x, 0).unwrap();
        assert_eq!(r.as_slice(), &[3.0, 2.0, 7.0, 4.0, 11.0, 6.0, 15.0, 8.0]);
    }

    #[test]
    fn mode_multiply_identity_and_zero() {
        let t = one_to_eight();
        for mode in 0..3 {
            assert_eq!(t.mode_multiply(&Matrix::identity(2), mode).unwrap(), t);
            let z = t.mode_multiply(&Matrix::zeros(3, 2), mode).unwrap();
            assert_eq!(z.dims()[mode], 3);
            assert!(z.as_slice().iter().all(|&v| v == 0.0));
        }
        assert!(t.mode_multiply(&Matrix::zeros(2, 3), 1).is_err());
    }

    #[test]
    fn multi_mode_rejects_duplicates_and_empty_is_noop() {
        let t = one_to_eight();
        assert_eq!(t.multi_mode_multiply(&[]).unwrap(), t);
        let i = Matrix::identity(2);
        assert_eq!(t.multi_mode_multiply(&[(&i, 1), (&i, 1)]), Err(Error::DuplicateMode(1)));
    }

    #[test]
    fn mixed_field_multiply_promotes() {
        let t = one_to_eight().to_complex();
        let x = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let r = t.mode_multiply_real(&x, 0).unwrap();
        assert_eq!(r.as_slice()[0], Complex64::new(3.0, 0.0));
    }

    #[test]
    fn fold_inverts_unfold() {
        let t = one_to_eight();
        for mode in 0..3 {
            let u = t.unfold(mode).unwrap();
            assert_eq!(Tensor::fold(&u, t.dims(), mode).unwrap(), t);
        }
    }

    fn small_tensor() -> impl Strategy<Value = Tensor<f64>> {
        prop::collection::vec(1usize..5, 2..5).prop_flat_map(|dims| {
            let n: usize = dims.iter().product();
            prop::collection::vec(-3.0f64..3.0, n)
                .prop_map(move |data| Tensor::new(dims.clone(), data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn flat_index_round_trip(dims in prop::collection::vec(1usize..6, 2..5)) {
            let n: usize = dims.iter().product();
            for k in 0..n {
                prop_assert_eq!(flat_index(&dims, &subscripts(&dims, k)), k);
            }
        }

        #[test]
        fn unfolding_identity_and_norm(t in small_tensor(), seed in 0u64..1000, rows in 1usize..5) {
            let scale = t.frobenius_norm().max(1.0);
            for mode in 0..t.order() {
                let n = t.dims()[mode];
                let x = Matrix::from_fn(rows, n, |i, j| {
                    let h = (seed.wrapping_mul(31) + (i * 7 + j * 13) as u64) % 17;
                    h as f64 / 8.0 - 1.0
                });
                let u = t.unfold(mode).unwrap();
                prop_assert!((u.frobenius_norm() - t.frobenius_norm()).abs() <= 1e-14 * scale);
                let lhs = t.mode_multiply(&x, mode).unwrap().unfold(mode).unwrap();
                let rhs = x.matmul(&u);
                let err = lhs.sub(&rhs).frobenius_norm();
                prop_assert!(err <= 1e-14 * scale * x.frobenius_norm().max(1.0));
                // adjoint path agrees with the explicit conjugate transpose
                let p = x.adjoint();
                let a = t.mode_multiply_adjoint(&p, mode).unwrap();
                let b = t.mode_multiply(&x, mode).unwrap();
                prop_assert!(a.sub(&b).unwrap().frobenius_norm() <= 1e-14 * scale * x.frobenius_norm().max(1.0));
            }
        }

        #[test]
        fn modes_commute(t in small_tensor(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let x0 = Matrix::from_fn(2, t.dims()[0], |i, j| a + (i + 2 * j) as f64 * 0.3);
            let x1 = Matrix::from_fn(3, t.dims()[1], |i, j| b - (2 * i + j) as f64 * 0.2);
            let r01 = t.multi_mode_multiply(&[(&x0, 0), (&x1, 1)]).unwrap();
            let r10 = t.multi_mode_multiply(&[(&x1, 1), (&x0, 0)]).unwrap();
            let scale = r01.frobenius_norm().max(1e-300);
            prop_assert!(r01.sub(&r10).unwrap().frobenius_norm() <= 1e-14 * scale);
        }
    }
}
