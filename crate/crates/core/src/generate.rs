//! Seeded planted problems `B = (T + η E) ×_1 Q_1 ⋯ ×_m Q_m`.
//!
//! `T` is zero except for its diagonal blocks `T_sss`, which sit in the
//! leading `k_1 × ⋯ × k_m` corner; `E` is Gaussian noise and each `Q_ℓ` is the
//! polar factor of a square Gaussian matrix. The planted factors are the
//! leading `k_ℓ` columns of `Q_ℓ`. Draw order from the seeded stream: the
//! diagonal blocks in order, then `E`, then `Q_1, ..., Q_m`.

use alloc::format;
use alloc::vec::Vec;

use crate::blocks::{bdiag_embed, BlockPartition, FactorTuple};
use crate::matrix::Matrix;
use crate::problem::ProblemBinding;
use crate::random::NormalRng;
use crate::scalar::{Field, Scalar};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProblemSpec {
    pub dims: Vec<usize>,
    pub partition: BlockPartition,
    pub eta: f64,
    pub field: Field,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta must be finite and nonnegative, got {}", self.eta)));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidShape(format!("zero extent in {:?}", self.dims)));
        }
        self.partition.check_fits(&self.dims)
    }
}

/// The η-independent draws of a planted family.
#[derive(Debug, Clone)]
pub struct PlantedBase<S> {
    dims: Vec<usize>,
    partition: BlockPartition,
    /// Diagonal blocks `T_sss`.
    pub blocks: Vec<Tensor<S>>,
    /// `E`, with the full dimensions of `B`.
    pub noise: Tensor<S>,
    /// Square orthonormal `Q_ℓ`.
    pub rotations: Vec<Matrix<S>>,
}

impl<S: Scalar> PlantedBase<S> {
    pub fn draw(dims: &[usize], partition: &BlockPartition, seed: u64) -> Result<Self> {
        partition.check_fits(dims)?;
        let mut rng = NormalRng::seed_from(seed);
        let blocks: Vec<Tensor<S>> = (0..partition.block_count())
            .map(|s| rng.tensor(&partition.block_dims(s)))
            .collect();
        let noise = rng.tensor(dims);
        let rotations = dims
            .iter()
            .map(|&n| rng.orthonormal(n, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(PlantedBase { dims: dims.to_vec(), partition: partition.clone(), blocks, noise, rotations })
    }

    /// `T` padded with zeros to the dimensions of `B`.
    pub fn planted_core(&self) -> Result<Tensor<S>> {
        let small = bdiag_embed(&self.blocks, &self.partition)?;
        let mut t = Tensor::zeros(&self.dims)?;
        for flat in 0..small.len() {
            let idx = crate::tensor::subscripts(small.dims(), flat);
            t.set(&idx, small.as_slice()[flat]);
        }
        Ok(t)
    }

    /// `B(η)`.
    pub fn tensor_at(&self, eta: f64) -> Result<Tensor<S>> {
        let mut t = self.planted_core()?;
        if eta != 0.0 {
            t = t.add(&self.noise.scaled(eta))?;
        }
        for (mode, q) in self.rotations.iter().enumerate() {
            t = t.mode_multiply(q, mode)?;
        }
        Ok(t)
    }

    pub fn planted_factors(&self) -> FactorTuple<S> {
        FactorTuple::new(
            self.rotations
                .iter()
                .enumerate()
                .map(|(mode, q)| q.columns(0..self.partition.rank(mode)))
                .collect(),
        )
    }

    /// `Σ_s |T_sss|_F^2`, the optimum when `η = 0`.
    pub fn planted_objective(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_sqr()).sum()
    }

    pub fn noise_norm(&self) -> f64 {
        self.noise.frobenius_norm()
    }

    pub fn instance(&self, spec: ProblemSpec) -> Result<ProblemInstance<S>> {
        spec.validate()?;
        if spec.dims != self.dims || spec.partition != self.partition {
            return Err(Error::mismatch("spec does not match the planted base"));
        }
        let tensor = self.tensor_at(spec.eta)?;
        Ok(ProblemInstance {
            tensor,
            spec,
            planted_blocks: self.blocks.clone(),
            rotations: self.rotations.clone(),
            noise_norm: self.noise_norm(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance<S> {
    pub tensor: Tensor<S>,
    pub spec: ProblemSpec,
    pub planted_blocks: Vec<Tensor<S>>,
    pub rotations: Vec<Matrix<S>>,
    /// `|E|_F`.
    pub noise_norm: f64,
}

impl<S: Scalar> ProblemInstance<S> {
    pub fn planted_factors(&self) -> FactorTuple<S> {
        FactorTuple::new(
            self.rotations
                .iter()
                .enumerate()
                .map(|(mode, q)| q.columns(0..self.spec.partition.rank(mode)))
                .collect(),
        )
    }

    pub fn planted_objective(&self) -> f64 {
        self.planted_blocks.iter().map(|b| b.norm_sqr()).sum()
    }

    pub fn binding(&self) -> Result<ProblemBinding<S>> {
        ProblemBinding::new(self.tensor.clone(), self.spec.partition.clone())
    }
}

/// Draws a fresh planted instance. The scalar type must match `spec.field`.
pub fn generate_problem<S: Scalar>(spec: &ProblemSpec) -> Result<ProblemInstance<S>> {
    spec.validate()?;
    if spec.field != S::FIELD {
        return Err(Error::InvalidConfig(format!(
            "spec asks for a {} problem, scalar type is {}",
            spec.field,
            S::FIELD
        )));
    }
    PlantedBase::draw(&spec.dims, &spec.partition, spec.seed)?.instance(spec.clone())
}
