//! Seeded, portable random draws.
//!
//! The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`.
//! Uniform variates use the top 53 bits of each `u64`: `u = (x >> 11) · 2^-53`.
//! Standard normals come in pairs from the Box–Muller transform
//! `sqrt(-2 ln(1 - u1)) · (cos 2πu2, sin 2πu2)`, first the cosine branch then
//! the sine branch. Complex normals draw the real part before the imaginary
//! part.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::linalg::polar_factor;
use crate::matrix::Matrix;
use crate::scalar::{Field, Scalar};
use crate::tensor::Tensor;
use crate::Result;

#[derive(Debug, Clone)]
pub struct NormalRng {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalRng {
    pub fn seed_from(seed: u64) -> Self {
        NormalRng {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    pub fn scalar<S: Scalar>(&mut self) -> S {
        let re = self.normal();
        let im = match S::FIELD {
            Field::Real => 0.0,
            Field::Complex => self.normal(),
        };
        S::from_parts(re, im)
    }

    /// Matrix of independent standard normals, filled column by column.
    pub fn matrix<S: Scalar>(&mut self, rows: usize, cols: usize) -> Matrix<S> {
        let data: Vec<S> = (0..rows * cols).map(|_| self.scalar()).collect();
        Matrix::from_col_major(rows, cols, data).expect("length matches")
    }

    /// Tensor of independent standard normals in colexicographic order.
    ///
    /// Panics on an invalid shape.
    pub fn tensor<S: Scalar>(&mut self, dims: &[usize]) -> Tensor<S> {
        let n = dims.iter().product();
        let data: Vec<S> = (0..n).map(|_| self.scalar()).collect();
        Tensor::new(dims.to_vec(), data).expect("valid tensor shape")
    }

    /// Orthonormal `n × k` matrix: the polar factor of a Gaussian matrix.
    pub fn orthonormal<S: Scalar>(&mut self, n: usize, k: usize) -> Result<Matrix<S>> {
        let g = self.matrix(n, k);
        Ok(polar_factor(&g)?.q)
    }
}
