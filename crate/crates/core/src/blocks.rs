//! Block partitions, block-diagonal extraction and reconstruction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use crate::matrix::Matrix;
use crate::random::NormalRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Per-mode block sizes `τ_ℓ = (k_ℓ1, ..., k_ℓt)` sharing one block count `t`.
///
/// Textual form: modes separated by `x`, block sizes by `,`; for example
/// `2,2,2,2x3,3,3,3x2,2,2,2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub struct BlockPartition {
    per_mode: Vec<Vec<usize>>,
}

impl BlockPartition {
    pub fn new(per_mode: Vec<Vec<usize>>) -> Result<Self> {
        if per_mode.len() < 2 {
            return Err(Error::InvalidPartition(format!(
                "need at least 2 modes, got {}",
                per_mode.len()
            )));
        }
        let t = per_mode[0].len();
        if t == 0 {
            return Err(Error::InvalidPartition("no blocks".into()));
        }
        for (mode, sizes) in per_mode.iter().enumerate() {
            if sizes.len() != t {
                return Err(Error::InvalidPartition(format!(
                    "mode {mode} has {} blocks, mode 0 has {t}",
                    sizes.len()
                )));
            }
            if sizes.contains(&0) {
                return Err(Error::InvalidPartition(format!("mode {mode} has an empty block")));
            }
        }
        Ok(BlockPartition { per_mode })
    }

    /// `t` identical blocks of the given per-mode sizes.
    pub fn uniform(block_dims: &[usize], t: usize) -> Result<Self> {
        Self::new(block_dims.iter().map(|&k| alloc::vec![k; t]).collect())
    }

    /// The Tucker case: one block spanning all of `ranks`.
    pub fn single(ranks: &[usize]) -> Result<Self> {
        Self::new(ranks.iter().map(|&k| alloc::vec![k]).collect())
    }

    pub fn order(&self) -> usize {
        self.per_mode.len()
    }

    /// Block count `t`.
    pub fn block_count(&self) -> usize {
        self.per_mode[0].len()
    }

    pub fn sizes(&self, mode: usize) -> &[usize] {
        &self.per_mode[mode]
    }

    /// `k_ℓ`, the total size of mode `mode`.
    pub fn rank(&self, mode: usize) -> usize {
        self.per_mode[mode].iter().sum()
    }

    pub fn ranks(&self) -> Vec<usize> {
        (0..self.order()).map(|m| self.rank(m)).collect()
    }

    /// Index range of block `block` on mode `mode`.
    pub fn range(&self, mode: usize, block: usize) -> Range<usize> {
        let start: usize = self.per_mode[mode][..block].iter().sum();
        start..start + self.per_mode[mode][block]
    }

    /// Dimensions `(k_1s, ..., k_ms)` of diagonal block `block`.
    pub fn block_dims(&self, block: usize) -> Vec<usize> {
        self.per_mode.iter().map(|s| s[block]).collect()
    }

    pub fn check_block(&self, block: usize) -> Result<()> {
        if block >= self.block_count() {
            return Err(Error::BlockOutOfRange { block, count: self.block_count() });
        }
        Ok(())
    }

    /// Checks that the partition fits a tensor with these dimensions (`k_ℓ ≤ n_ℓ`).
    pub fn check_fits(&self, dims: &[usize]) -> Result<()> {
        if dims.len() != self.order() {
            return Err(Error::mismatch(format!(
                "partition has {} modes, tensor has {}",
                self.order(),
                dims.len()
            )));
        }
        for (mode, &n) in dims.iter().enumerate() {
            if self.rank(mode) > n {
                return Err(Error::mismatch(format!(
                    "mode {mode}: rank {} exceeds dimension {n}",
                    self.rank(mode)
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for BlockPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (m, sizes) in self.per_mode.iter().enumerate() {
            if m > 0 {
                f.write_str("x")?;
            }
            for (i, k) in sizes.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{k}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for BlockPartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let per_mode = s
            .trim()
            .split(['x', 'X'])
            .map(|mode| {
                mode.split(',')
                    .map(|k| {
                        k.trim().parse::<usize>().map_err(|_| {
                            Error::InvalidPartition(format!("bad block size `{}` in `{s}`", k.trim()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(per_mode)
    }
}

impl TryFrom<String> for BlockPartition {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BlockPartition> for String {
    fn from(p: BlockPartition) -> String {
        alloc::string::ToString::to_string(&p)
    }
}

/// One factor `P_ℓ` (`n_ℓ × k_ℓ`) per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTuple<S> {
    factors: Vec<Matrix<S>>,
}

impl<S: Scalar> FactorTuple<S> {
    pub fn new(factors: Vec<Matrix<S>>) -> Self {
        FactorTuple { factors }
    }

    /// Leading identity columns on every mode.
    pub fn identity_columns(dims: &[usize], ranks: &[usize]) -> Self {
        FactorTuple {
            factors: dims
                .iter()
                .zip(ranks)
                .map(|(&n, &k)| Matrix::identity_columns(n, k))
                .collect(),
        }
    }

    /// Independent random orthonormal factors.
    pub fn random(dims: &[usize], ranks: &[usize], rng: &mut NormalRng) -> Result<Self> {
        let factors = dims
            .iter()
            .zip(ranks)
            .map(|(&n, &k)| rng.orthonormal(n, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(FactorTuple { factors })
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Matrix<S>] {
        &self.factors
    }

    pub fn get(&self, mode: usize) -> &Matrix<S> {
        &self.factors[mode]
    }

    pub fn set(&mut self, mode: usize, factor: Matrix<S>) {
        self.factors[mode] = factor;
    }

    pub fn into_inner(self) -> Vec<Matrix<S>> {
        self.factors
    }

    /// Largest `|P^H P - I|_F` over all modes.
    pub fn orthonormality_error(&self) -> f64 {
        self.factors
            .iter()
            .map(|p| p.orthonormality_error())
            .fold(0.0, f64::max)
    }

    /// Checks shapes against tensor dimensions and a partition.
    pub fn check_conformal(&self, dims: &[usize], partition: &BlockPartition) -> Result<()> {
        if self.order() != dims.len() || partition.order() != dims.len() {
            return Err(Error::mismatch(format!(
                "{} factors, {} partition modes, {} tensor modes",
                self.order(),
                partition.order(),
                dims.len()
            )));
        }
        for (mode, p) in self.factors.iter().enumerate() {
            if p.rows() != dims[mode] || p.cols() != partition.rank(mode) {
                return Err(Error::mismatch(format!(
                    "factor {mode} is {}x{}, expected {}x{}",
                    p.rows(),
                    p.cols(),
                    dims[mode],
                    partition.rank(mode)
                )));
            }
        }
        Ok(())
    }

    pub fn check_orthonormal(&self, tol: f64) -> Result<()> {
        for (mode, p) in self.factors.iter().enumerate() {
            let error = p.orthonormality_error();
            if error.is_nan() || error > tol {
                return Err(Error::NotOrthonormal { mode, error });
            }
        }
        Ok(())
    }
}

/// Column block `P_{mode,block}` of a factor.
pub fn factor_block<S: Scalar>(
    p: &Matrix<S>,
    partition: &BlockPartition,
    mode: usize,
    block: usize,
) -> Result<Matrix<S>> {
    if mode >= partition.order() {
        return Err(Error::ModeOutOfRange { mode, order: partition.order() });
    }
    partition.check_block(block)?;
    if p.cols() != partition.rank(mode) {
        return Err(Error::mismatch(format!(
            "factor has {} columns, partition expects {}",
            p.cols(),
            partition.rank(mode)
        )));
    }
    Ok(p.columns(partition.range(mode, block)))
}

fn check_core_dims(dims: &[usize], partition: &BlockPartition) -> Result<()> {
    if dims != partition.ranks().as_slice() {
        return Err(Error::mismatch(format!(
            "tensor dims {dims:?} do not match partition ranks {:?}",
            partition.ranks()
        )));
    }
    Ok(())
}

/// The diagonal blocks `T_sss` of a `k_1 × ⋯ × k_m` tensor.
pub fn bdiag_extract<S: Scalar>(t: &Tensor<S>, partition: &BlockPartition) -> Result<Vec<Tensor<S>>> {
    check_core_dims(t.dims(), partition)?;
    (0..partition.block_count())
        .map(|s| {
            let ranges: Vec<Range<usize>> =
                (0..partition.order()).map(|m| partition.range(m, s)).collect();
            Tensor::from_fn(&partition.block_dims(s), |idx| {
                let full: Vec<usize> = idx.iter().zip(&ranges).map(|(i, r)| r.start + i).collect();
                t.get(&full)
            })
        })
        .collect()
}

/// Places diagonal blocks into an otherwise zero `k_1 × ⋯ × k_m` tensor.
pub fn bdiag_embed<S: Scalar>(blocks: &[Tensor<S>], partition: &BlockPartition) -> Result<Tensor<S>> {
    if blocks.len() != partition.block_count() {
        return Err(Error::mismatch(format!(
            "{} blocks for a {}-block partition",
            blocks.len(),
            partition.block_count()
        )));
    }
    let mut out = Tensor::zeros(&partition.ranks())?;
    for (s, block) in blocks.iter().enumerate() {
        if block.dims() != partition.block_dims(s).as_slice() {
            return Err(Error::mismatch(format!(
                "block {s} has dims {:?}, expected {:?}",
                block.dims(),
                partition.block_dims(s)
            )));
        }
        let starts: Vec<usize> = (0..partition.order()).map(|m| partition.range(m, s).start).collect();
        let mut full = alloc::vec![0; partition.order()];
        for (flat, &v) in block.as_slice().iter().enumerate() {
            let idx = crate::tensor::subscripts(block.dims(), flat);
            for ((f, i), st) in full.iter_mut().zip(&idx).zip(&starts) {
                *f = i + st;
            }
            out.set(&full, v);
        }
    }
    Ok(out)
}

/// `T = B ×_1 P_1^H ⋯ ×_m P_m^H`.
pub fn core_tensor<S: Scalar>(b: &Tensor<S>, p: &FactorTuple<S>) -> Result<Tensor<S>> {
    if p.order() != b.order() {
        return Err(Error::mismatch(format!(
            "{} factors for a {}-mode tensor",
            p.order(),
            b.order()
        )));
    }
    let mut t = b.clone();
    for (mode, f) in p.factors().iter().enumerate() {
        t = t.mode_multiply_adjoint(f, mode)?;
    }
    Ok(t)
}

/// `Σ_s T_sss ×_1 P_1s ⋯ ×_m P_ms`.
pub fn reconstruct<S: Scalar>(
    blocks: &[Tensor<S>],
    p: &FactorTuple<S>,
    partition: &BlockPartition,
) -> Result<Tensor<S>> {
    if blocks.len() != partition.block_count() || p.order() != partition.order() {
        return Err(Error::mismatch(format!(
            "{} blocks and {} factors for a {}-block, {}-mode partition",
            blocks.len(),
            p.order(),
            partition.block_count(),
            partition.order()
        )));
    }
    let dims: Vec<usize> = p.factors().iter().map(|f| f.rows()).collect();
    let mut out = Tensor::zeros(&dims)?;
    for (s, block) in blocks.iter().enumerate() {
        if block.dims() != partition.block_dims(s).as_slice() {
            return Err(Error::mismatch(format!("block {s} has dims {:?}", block.dims())));
        }
        let mut term = block.clone();
        for mode in 0..partition.order() {
            let ps = factor_block(p.get(mode), partition, mode, s)?;
            term = term.mode_multiply(&ps, mode)?;
        }
        out = out.add(&term)?;
    }
    Ok(out)
}
