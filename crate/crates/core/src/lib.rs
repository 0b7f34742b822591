//! Principal tensor block-diagonalization (PTBD).
//!
//! Given a dense m-mode tensor `B` and a block partition of the target ranks,
//! find orthonormal factors `P_1, ..., P_m` so that the block-diagonal part of
//! the core `B ×_1 P_1^H ⋯ ×_m P_m^H` carries as much Frobenius mass as
//! possible. The crate provides:
//!
//! * [`tensor`] and [`matrix`]: colexicographic dense storage with unfolding
//!   and mode multiplication,
//! * [`blocks`]: partitions, block-diagonal extraction and reconstruction,
//! * [`linalg`]: Jacobi SVD, polar factors, subspace extension and distances,
//! * [`problem`]: the objective, partial gradients and KKT residuals,
//! * [`solver`]: the alternating polar-factor SCF iteration and its
//!   LOCG-accelerated variant, with convergence diagnostics,
//! * [`generate`]: seeded planted test problems.
//!
//! The crate is `no_std` and only needs `alloc`. Mode indices are zero-based
//! throughout the API.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod blocks;
pub mod clock;
mod error;
pub mod generate;
pub mod linalg;
pub mod matrix;
pub mod problem;
pub mod random;
pub mod scalar;
pub mod solver;
pub mod tensor;

pub use blocks::{BlockPartition, FactorTuple};
pub use error::{Error, Result};
pub use generate::{generate_problem, PlantedBase, ProblemInstance, ProblemSpec};
pub use matrix::Matrix;
pub use problem::ProblemBinding;
pub use scalar::{Field, Scalar};
pub use solver::{
    accnpdo_solve, diagnostics_series, npdo_solve, IterationRecord, Method, SolveResult,
    SolveStatus, SolverConfig,
};
pub use tensor::Tensor;

pub use num_complex::Complex64;
