//! The PTBD objective, partial gradients and KKT residuals.
//!
//! For block `s` and mode `ℓ` the contraction
//! `C_ℓs = unfold_ℓ(B ×_{i≠ℓ} P_is^H)` is an `n_ℓ × Π_{i≠ℓ} k_is` matrix. The
//! objective is `f = Σ_s |C_ℓs^H P_ℓs|_F^2` for any `ℓ`, and the partial
//! gradient block is `C_ℓs (C_ℓs^H P_ℓs)`. Gradients here omit the factor 2 of
//! the true Euclidean gradient; the polar factor does not see the difference.

use alloc::format;
use alloc::vec::Vec;

use crate::blocks::{factor_block, BlockPartition, FactorTuple};
use crate::linalg::{spectral_norm_estimate, sym, Unfolding};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// A tensor, its partition, and the cached norms that normalize KKT residuals.
#[derive(Debug, Clone)]
pub struct ProblemBinding<S> {
    tensor: Tensor<S>,
    partition: BlockPartition,
    norm: f64,
    unfold_norms: Vec<f64>,
}

impl<S: Scalar> ProblemBinding<S> {
    /// Binds `tensor` to `partition`, computing `|B|_F` and estimates of
    /// `|B_(ℓ)|_2` for every mode.
    pub fn new(tensor: Tensor<S>, partition: BlockPartition) -> Result<Self> {
        partition.check_fits(tensor.dims())?;
        let norm = tensor.frobenius_norm();
        let unfold_norms = (0..tensor.order())
            .map(|mode| Unfolding::new(&tensor, mode).map(|u| spectral_norm_estimate(&u)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProblemBinding { tensor, partition, norm, unfold_norms })
    }

    /// Binds with externally supplied normalization constants. Reduced
    /// problems use this to keep the normalization of the problem they came from.
    pub fn with_normalization(
        tensor: Tensor<S>,
        partition: BlockPartition,
        norm: f64,
        unfold_norms: Vec<f64>,
    ) -> Result<Self> {
        partition.check_fits(tensor.dims())?;
        if unfold_norms.len() != tensor.order() {
            return Err(Error::mismatch(format!(
                "{} unfolding norms for a {}-mode tensor",
                unfold_norms.len(),
                tensor.order()
            )));
        }
        Ok(ProblemBinding { tensor, partition, norm, unfold_norms })
    }

    pub fn tensor(&self) -> &Tensor<S> {
        &self.tensor
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn dims(&self) -> &[usize] {
        self.tensor.dims()
    }

    pub fn order(&self) -> usize {
        self.tensor.order()
    }

    /// Cached `|B|_F`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Cached estimates of `|B_(ℓ)|_2`.
    pub fn unfold_norms(&self) -> &[f64] {
        &self.unfold_norms
    }

    /// `|B|_F |B_(ℓ)|_2`, the denominator of the mode-`mode` KKT term.
    pub fn normalizer(&self, mode: usize) -> f64 {
        self.norm * self.unfold_norms[mode]
    }

    pub fn check_factors(&self, p: &FactorTuple<S>) -> Result<()> {
        p.check_conformal(self.tensor.dims(), &self.partition)
    }

    pub fn objective(&self, p: &FactorTuple<S>) -> Result<f64> {
        objective_value(&self.tensor, p, &self.partition)
    }

    pub fn gradients(&self, p: &FactorTuple<S>) -> Result<Vec<Matrix<S>>> {
        all_gradients(&self.tensor, p, &self.partition)
    }

    /// Normalized sum of `|G_ℓ - P_ℓ sym(P_ℓ^H G_ℓ)|_F` over modes. A zero
    /// denominator makes its term zero.
    pub fn kkt_from_gradients(&self, gradients: &[Matrix<S>], p: &[Matrix<S>]) -> Result<f64> {
        if gradients.len() != self.order() || p.len() != self.order() {
            return Err(Error::mismatch(format!(
                "{} gradients and {} factors for a {}-mode problem",
                gradients.len(),
                p.len(),
                self.order()
            )));
        }
        let mut total = 0.0;
        for (mode, (g, pl)) in gradients.iter().zip(p).enumerate() {
            let r = residual_from_gradient(pl, g)?;
            total += normalized(r.frobenius_norm(), self.normalizer(mode));
        }
        Ok(total)
    }

    /// `ε_KKT` with every gradient evaluated at the same tuple `p`.
    pub fn kkt_residual_full(&self, p: &FactorTuple<S>) -> Result<f64> {
        let g = self.gradients(p)?;
        self.kkt_from_gradients(&g, p.factors())
    }

    /// `ε̃_KKT` from the staggered gradients `Ĝ_ℓ` of a Gauss-Seidel sweep and
    /// the factors `P^(j)` the sweep started from.
    pub fn kkt_residual_cheap(&self, staggered: &[Matrix<S>], previous: &FactorTuple<S>) -> Result<f64> {
        self.kkt_from_gradients(staggered, previous.factors())
    }
}

pub(crate) fn normalized(value: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        value / denominator
    } else {
        0.0
    }
}

fn check_inputs<S: Scalar>(b: &Tensor<S>, p: &FactorTuple<S>, partition: &BlockPartition) -> Result<()> {
    p.check_conformal(b.dims(), partition)
}

/// Column blocks `P_is` for one block `s`, one per mode.
pub(crate) fn block_factors<S: Scalar>(
    p: &[Matrix<S>],
    partition: &BlockPartition,
    block: usize,
) -> Result<Vec<Matrix<S>>> {
    p.iter()
        .enumerate()
        .map(|(mode, f)| factor_block(f, partition, mode, block))
        .collect()
}

/// `C_ℓs = unfold_ℓ(B ×_{i≠ℓ} P_is^H)`.
pub fn contraction<S: Scalar>(
    b: &Tensor<S>,
    p: &FactorTuple<S>,
    partition: &BlockPartition,
    mode: usize,
    block: usize,
) -> Result<Matrix<S>> {
    check_inputs(b, p, partition)?;
    if mode >= b.order() {
        return Err(Error::ModeOutOfRange { mode, order: b.order() });
    }
    partition.check_block(block)?;
    let ps = block_factors(p.factors(), partition, block)?;
    let mut t = b.clone();
    for (i, pi) in ps.iter().enumerate() {
        if i != mode {
            t = t.mode_multiply_adjoint(pi, i)?;
        }
    }
    t.unfold(mode)
}

/// `f(P) = Σ_s |B ×_1 P_1s^H ⋯ ×_m P_ms^H|_F^2`.
pub fn objective_value<S: Scalar>(b: &Tensor<S>, p: &FactorTuple<S>, partition: &BlockPartition) -> Result<f64> {
    check_inputs(b, p, partition)?;
    let mut total = 0.0;
    for s in 0..partition.block_count() {
        let ps = block_factors(p.factors(), partition, s)?;
        let mut t = b.clone();
        for (i, pi) in ps.iter().enumerate().rev() {
            t = t.mode_multiply_adjoint(pi, i)?;
        }
        total += t.norm_sqr();
    }
    Ok(total)
}

/// `G_ℓ = [C_ℓ1 (C_ℓ1^H P_ℓ1), ..., C_ℓt (C_ℓt^H P_ℓt)]`.
pub fn partial_gradient<S: Scalar>(
    b: &Tensor<S>,
    p: &FactorTuple<S>,
    partition: &BlockPartition,
    mode: usize,
) -> Result<Matrix<S>> {
    check_inputs(b, p, partition)?;
    if mode >= b.order() {
        return Err(Error::ModeOutOfRange { mode, order: b.order() });
    }
    let blocks = (0..partition.block_count())
        .map(|s| {
            let c = contraction(b, p, partition, mode, s)?;
            let ps = factor_block(p.get(mode), partition, mode, s)?;
            Ok(gradient_block(&c, &ps))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Matrix<S>> = blocks.iter().collect();
    Matrix::hcat(&refs)
}

/// `C (C^H P)`.
pub(crate) fn gradient_block<S: Scalar>(c: &Matrix<S>, p: &Matrix<S>) -> Matrix<S> {
    c.matmul(&c.adjoint_mul(p))
}

/// `G - P sym(P^H G)`.
pub fn residual_from_gradient<S: Scalar>(p: &Matrix<S>, g: &Matrix<S>) -> Result<Matrix<S>> {
    if p.shape() != g.shape() {
        return Err(Error::mismatch(format!(
            "factor is {}x{}, gradient is {}x{}",
            p.rows(),
            p.cols(),
            g.rows(),
            g.cols()
        )));
    }
    let lambda = sym(&p.adjoint_mul(g))?;
    Ok(g.sub(&p.matmul(&lambda)))
}

/// `R_ℓ = G_ℓ - P_ℓ sym(P_ℓ^H G_ℓ)`.
pub fn locg_residual<S: Scalar>(
    b: &Tensor<S>,
    p: &FactorTuple<S>,
    partition: &BlockPartition,
    mode: usize,
) -> Result<Matrix<S>> {
    let g = partial_gradient(b, p, partition, mode)?;
    residual_from_gradient(p.get(mode), &g)
}

/// All `m` partial gradients at one tuple, sharing contractions.
pub fn all_gradients<S: Scalar>(b: &Tensor<S>, p: &FactorTuple<S>, partition: &BlockPartition) -> Result<Vec<Matrix<S>>> {
    check_inputs(b, p, partition)?;
    let cache = SuffixCache::build(b, p.factors(), partition)?;
    (0..b.order())
        .map(|mode| Ok(cache.mode_pass(b, p.factors(), partition, mode)?.gradient))
        .collect()
}

/// Per-block suffix products `B ×_{i>ℓ} P_is^H` taken with the factors in
/// place when the cache was built.
///
/// During a Gauss-Seidel sweep the modes after `ℓ` still hold their old
/// factors when `ℓ` is processed, so the suffix for `ℓ` stays valid while
/// the prefix modes are contracted with the freshly updated factors.
pub(crate) struct SuffixCache<S> {
    /// `suffix[s][ℓ]` for `ℓ < m - 1`; mode `m - 1` uses `B` itself.
    suffix: Vec<Vec<Tensor<S>>>,
}

/// What one mode of a sweep needs: the gradient and the objective seen
/// through the current factor.
pub(crate) struct ModePass<S> {
    pub contractions: Vec<Matrix<S>>,
    pub gradient: Matrix<S>,
    /// `Σ_s |C_ℓs^H P_ℓs|^2` with the factor used to build the gradient.
    pub objective: f64,
}

impl<S: Scalar> SuffixCache<S> {
    pub fn build(b: &Tensor<S>, p: &[Matrix<S>], partition: &BlockPartition) -> Result<Self> {
        let m = b.order();
        let suffix = (0..partition.block_count())
            .map(|s| {
                let ps = block_factors(p, partition, s)?;
                let mut chain: Vec<Tensor<S>> = Vec::with_capacity(m - 1);
                for l in (0..m - 1).rev() {
                    let src = chain.last().unwrap_or(b);
                    let next = src.mode_multiply_adjoint(&ps[l + 1], l + 1)?;
                    chain.push(next);
                }
                chain.reverse();
                Ok(chain)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SuffixCache { suffix })
    }

    /// `C_ℓs` using the cached suffix and the current prefix factors in `p`.
    pub fn contraction(
        &self,
        b: &Tensor<S>,
        p: &[Matrix<S>],
        partition: &BlockPartition,
        mode: usize,
        block: usize,
    ) -> Result<Matrix<S>> {
        let chain = &self.suffix[block];
        let base = chain.get(mode).unwrap_or(b);
        if mode == 0 {
            return base.unfold(0);
        }
        let mut t = base.mode_multiply_adjoint(&factor_block(&p[0], partition, 0, block)?, 0)?;
        for (i, pi) in p.iter().enumerate().take(mode).skip(1) {
            t = t.mode_multiply_adjoint(&factor_block(pi, partition, i, block)?, i)?;
        }
        t.unfold(mode)
    }

    pub fn mode_pass(
        &self,
        b: &Tensor<S>,
        p: &[Matrix<S>],
        partition: &BlockPartition,
        mode: usize,
    ) -> Result<ModePass<S>> {
        let t = partition.block_count();
        let mut contractions = Vec::with_capacity(t);
        let mut gradient = Matrix::zeros(p[mode].rows(), p[mode].cols());
        let mut objective = 0.0;
        for s in 0..t {
            let c = self.contraction(b, p, partition, mode, s)?;
            let ps = factor_block(&p[mode], partition, mode, s)?;
            let w = c.adjoint_mul(&ps);
            objective += w.norm_sqr();
            gradient.set_columns(partition.range(mode, s).start, &c.matmul(&w));
            contractions.push(c);
        }
        Ok(ModePass { contractions, gradient, objective })
    }
}

/// `Σ_s |C_s^H P_s|^2` for already computed contractions of one mode.
pub(crate) fn objective_from_contractions<S: Scalar>(
    contractions: &[Matrix<S>],
    p: &Matrix<S>,
    partition: &BlockPartition,
    mode: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (s, c) in contractions.iter().enumerate() {
        let ps = factor_block(p, partition, mode, s)?;
        total += c.adjoint_mul(&ps).norm_sqr();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{bdiag_extract, core_tensor};
    use crate::linalg::sin_theta_frob;
    use crate::random::NormalRng;
    use alloc::vec;
    use num_complex::Complex64;

    fn one_to_eight() -> Tensor<f64> {
        Tensor::new(vec![2, 2, 2], (1..=8).map(f64::from).collect()).unwrap()
    }

    fn random_problem<S: Scalar>(seed: u64, dims: &[usize], part: &str) -> (Tensor<S>, FactorTuple<S>, BlockPartition) {
        let partition: BlockPartition = part.parse().unwrap();
        let mut rng = NormalRng::seed_from(seed);
        let b = rng.tensor(dims);
        let p = FactorTuple::random(dims, &partition.ranks(), &mut rng).unwrap();
        (b, p, partition)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn unit_blocks_objective_is_65() {
        let unit = BlockPartition::uniform(&[1, 1, 1], 2).unwrap();
        let p = FactorTuple::identity_columns(&[2, 2, 2], &[2, 2, 2]);
        assert_eq!(objective_value(&one_to_eight(), &p, &unit).unwrap(), 65.0);
        let zero = Tensor::<f64>::zeros(&[2, 2, 2]).unwrap();
        assert_eq!(objective_value(&zero, &p, &unit).unwrap(), 0.0);
    }

    #[test]
    fn contraction_with_identity_columns_selects_coordinates() {
        let part = BlockPartition::single(&[2, 2, 3]).unwrap();
        let b = Tensor::from_fn(&[4, 3, 5], |i| (1 + i[0] + 4 * i[1] + 12 * i[2]) as f64).unwrap();
        let p = FactorTuple::identity_columns(b.dims(), &[2, 2, 3]);
        let c = contraction(&b, &p, &part, 0, 0).unwrap();
        let lead = Tensor::from_fn(&[4, 2, 3], |i| b.get(i)).unwrap();
        assert_eq!(c, lead.unfold(0).unwrap());
        let zero = Tensor::<f64>::zeros(&[4, 3, 5]).unwrap();
        assert_eq!(contraction(&zero, &p, &part, 1, 0).unwrap().norm_sqr(), 0.0);
        assert!(contraction(&b, &p, &part, 3, 0).is_err());
    }

    #[test]
    fn three_objective_formulas_agree() {
        let (b, p, part) = random_problem::<Complex64>(1, &[6, 5, 4], "1,2x2,1x1,1");
        let f = objective_value(&b, &p, &part).unwrap();
        let via_core: f64 = bdiag_extract(&core_tensor(&b, &p).unwrap(), &part)
            .unwrap()
            .iter()
            .map(|t| t.norm_sqr())
            .sum();
        assert!(rel(f, via_core) < 1e-12);
        for mode in 0..3 {
            let mut norms = 0.0;
            let mut traces = 0.0;
            for s in 0..2 {
                let c = contraction(&b, &p, &part, mode, s).unwrap();
                let ps = factor_block(p.get(mode), &part, mode, s).unwrap();
                norms += ps.adjoint_mul(&c).norm_sqr();
                let h = c.matmul(&c.adjoint());
                traces += ps.adjoint_mul(&h.matmul(&ps)).trace().re;
            }
            assert!(rel(f, norms) < 1e-12);
            assert!(rel(f, traces) < 1e-12);
        }
        assert!(f <= b.norm_sqr());
    }

    #[test]
    fn gradient_matches_explicit_gram() {
        let (b, p, part) = random_problem::<f64>(2, &[5, 6, 4], "1,1x2,1x1,2");
        for mode in 0..3 {
            let g = partial_gradient(&b, &p, &part, mode).unwrap();
            let mut cols = Vec::new();
            for s in 0..2 {
                let c = contraction(&b, &p, &part, mode, s).unwrap();
                let h = c.matmul(&c.transpose());
                cols.push(h.matmul(&factor_block(p.get(mode), &part, mode, s).unwrap()));
            }
            let direct = Matrix::hcat(&[&cols[0], &cols[1]]).unwrap();
            assert!(g.sub(&direct).frobenius_norm() <= 1e-12 * direct.frobenius_norm());
        }
        let zero = Tensor::<f64>::zeros(&[5, 6, 4]).unwrap();
        assert_eq!(partial_gradient(&zero, &p, &part, 0).unwrap().norm_sqr(), 0.0);
    }

    #[test]
    fn cached_gradients_match_direct_ones() {
        let (b, p, part) = random_problem::<Complex64>(3, &[4, 5, 3, 3], "1,1x2,1x1,1x1,2");
        let all = all_gradients(&b, &p, &part).unwrap();
        for (mode, g) in all.iter().enumerate() {
            let direct = partial_gradient(&b, &p, &part, mode).unwrap();
            assert!(g.sub(&direct).frobenius_norm() <= 1e-12 * direct.frobenius_norm());
        }
    }

    #[test]
    fn finite_differences_match_twice_the_gradient() {
        let (b, mut p, part) = random_problem::<f64>(4, &[5, 4, 3], "1,1x1,2x2,1");
        let h = 1e-5;
        for mode in 0..3 {
            let g = partial_gradient(&b, &p, &part, mode).unwrap().scaled(2.0);
            let scale = g.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let base = p.get(mode).clone();
            for j in 0..base.cols() {
                for i in 0..base.rows() {
                    let mut plus = base.clone();
                    plus[(i, j)] += h;
                    p.set(mode, plus);
                    let fp = objective_value(&b, &p, &part).unwrap();
                    let mut minus = base.clone();
                    minus[(i, j)] -= h;
                    p.set(mode, minus);
                    let fm = objective_value(&b, &p, &part).unwrap();
                    let fd = (fp - fm) / (2.0 * h);
                    assert!((fd - g[(i, j)]).abs() <= 1e-6 * scale, "mode {mode} ({i},{j})");
                }
            }
            p.set(mode, base);
        }
    }

    #[test]
    fn residual_is_skew_after_projection() {
        let (b, p, part) = random_problem::<Complex64>(5, &[6, 5, 4], "2,1x1,2x2,2");
        for mode in 0..3 {
            let r = locg_residual(&b, &p, &part, mode).unwrap();
            let prp = p.get(mode).adjoint_mul(&r);
            let herm = sym(&prp).unwrap();
            assert!(herm.frobenius_norm() <= 1e-12 * b.norm_sqr());
        }
        let zero = Tensor::<Complex64>::zeros(&[6, 5, 4]).unwrap();
        assert_eq!(locg_residual(&zero, &p, &part, 1).unwrap().norm_sqr(), 0.0);
    }

    #[test]
    fn kkt_of_zero_tensor_is_zero() {
        let part: BlockPartition = "1,1x1,1x1,1".parse().unwrap();
        let zero = Tensor::<f64>::zeros(&[3, 3, 3]).unwrap();
        let binding = ProblemBinding::new(zero, part).unwrap();
        let p = FactorTuple::identity_columns(&[3, 3, 3], &[2, 2, 2]);
        assert_eq!(binding.kkt_residual_full(&p).unwrap(), 0.0);
    }

    #[test]
    fn kkt_positive_at_random_tuple_and_cheap_matches_on_same_tuple() {
        let (b, p, part) = random_problem::<f64>(6, &[6, 5, 4], "1,1x1,1x1,1");
        let binding = ProblemBinding::new(b, part).unwrap();
        let full = binding.kkt_residual_full(&p).unwrap();
        assert!(full > 0.0);
        let g = binding.gradients(&p).unwrap();
        assert_eq!(binding.kkt_residual_cheap(&g, &p).unwrap(), full);
    }

    #[test]
    fn mass_outside_every_block_gives_zero_gradient() {
        // B lives on coordinates the factors do not touch.
        let part = BlockPartition::uniform(&[1, 1, 1], 2).unwrap();
        let b = Tensor::from_fn(&[3, 3, 3], |i| if i.iter().all(|&x| x == 2) { 5.0 } else { 0.0 }).unwrap();
        let binding = ProblemBinding::new(b, part).unwrap();
        let p = FactorTuple::identity_columns(&[3, 3, 3], &[2, 2, 2]);
        let g = binding.gradients(&p).unwrap();
        assert!(g.iter().all(|m| m.norm_sqr() == 0.0));
        assert_eq!(binding.kkt_residual_cheap(&g, &p).unwrap(), 0.0);
    }

    #[test]
    fn objective_is_invariant_under_block_gauge() {
        let (b, p, part) = random_problem::<Complex64>(7, &[6, 5, 5], "1,2x2,1x2,2");
        let mut rng = NormalRng::seed_from(70);
        let f = objective_value(&b, &p, &part).unwrap();
        let rotated: Vec<Matrix<Complex64>> = (0..3)
            .map(|mode| {
                let k = part.rank(mode);
                let mut q = Matrix::zeros(k, k);
                for s in 0..2 {
                    let r = part.range(mode, s);
                    let g: Matrix<Complex64> = rng.orthonormal(r.len(), r.len()).unwrap();
                    for (jj, j) in r.clone().enumerate() {
                        for (ii, i) in r.clone().enumerate() {
                            q[(i, j)] = g[(ii, jj)];
                        }
                    }
                }
                p.get(mode).matmul(&q)
            })
            .collect();
        let rotated = FactorTuple::new(rotated);
        assert!(rel(f, objective_value(&b, &rotated, &part).unwrap()) < 1e-12);
        for mode in 0..3 {
            assert!(sin_theta_frob(p.get(mode), rotated.get(mode)).unwrap() < 1e-6);
        }
    }

    #[test]
    fn ansatz_with_true_gradient() {
        // f is convex in one factor, so f(P̂) ≥ f(P) + Re<2G, P̂ - P> for any P̂.
        let mut rng = NormalRng::seed_from(8);
        for trial in 0..50 {
            let (b, p, part) = random_problem::<Complex64>(100 + trial, &[5, 4, 4], "1,1x2,1x1,2");
            let mode = (trial % 3) as usize;
            let f = objective_value(&b, &p, &part).unwrap();
            let g = partial_gradient(&b, &p, &part, mode).unwrap();
            let hat: Matrix<Complex64> = rng.orthonormal(p.get(mode).rows(), p.get(mode).cols()).unwrap();
            let eta = 2.0 * (hat.inner_re(&g) - p.get(mode).inner_re(&g));
            let mut q = p.clone();
            q.set(mode, hat);
            let fh = objective_value(&b, &q, &part).unwrap();
            assert!(fh >= f + eta - 1e-10 * b.norm_sqr(), "trial {trial}");
        }
    }

    #[test]
    fn binding_rejects_oversized_partition() {
        let part: BlockPartition = "2,2x1,1".parse().unwrap();
        assert!(ProblemBinding::new(Tensor::<f64>::zeros(&[3, 3]).unwrap(), part).is_err());
    }
}
