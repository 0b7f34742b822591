use alloc::vec::Vec;

use super::npdo::run_sweeps;
use super::{check_start, finish, relative_change, IterationRecord, SolveResult, SolveStatus, SolverConfig, StallCounter, DRIFT_TOL};
use crate::blocks::FactorTuple;
use crate::clock::{Clock, NoClock};
use crate::linalg::{orth_complement_extend, polar_factor, trace_norm};
use crate::matrix::Matrix;
use crate::problem::{normalized, residual_from_gradient, ProblemBinding};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::Result;

/// LOCG-accelerated NPDo.
///
/// Each outer step restricts `P_ℓ` to `range([P_ℓ, R_ℓ, P_ℓ^prev])`, where
/// `R_ℓ` is the projected gradient residual, and solves the reduced problem
/// with NPDo from the current iterate. The inner solve stops at
/// `inner_fraction` times the outer KKT residual or after `max_inner` sweeps.
pub fn accnpdo_solve<S: Scalar>(
    binding: &ProblemBinding<S>,
    init: &FactorTuple<S>,
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    accnpdo_solve_with_clock(binding, init, config, &NoClock)
}

pub fn accnpdo_solve_with_clock<S: Scalar>(
    binding: &ProblemBinding<S>,
    init: &FactorTuple<S>,
    config: &SolverConfig,
    clock: &dyn Clock,
) -> Result<SolveResult<S>> {
    check_start(binding, init, config)?;
    let start = clock.now();
    let partition = binding.partition();
    let mut p = init.clone();
    let mut prev: Option<FactorTuple<S>> = None;
    let mut last_objective: Option<f64> = None;
    let mut trace = Vec::new();
    let mut stall = StallCounter::default();
    let mut status = SolveStatus::MaxIter;
    let mut inner_config = SolverConfig {
        max_outer: config.max_inner,
        use_obj_stop: false,
        record_diagnostics: false,
        ..config.clone()
    };

    for j in 1..=config.max_outer {
        let step = (|| {
            let gradients = binding.gradients(&p)?;
            // f = Re tr(P_ℓ^H G_ℓ) for any mode.
            let objective = p.get(0).inner_re(&gradients[0]);
            let mut kkt = 0.0;
            let mut eta_star = 0.0f64;
            let mut residuals = Vec::with_capacity(p.order());
            for (mode, g) in gradients.iter().enumerate() {
                let r = residual_from_gradient(p.get(mode), g)?;
                kkt += normalized(r.frobenius_norm(), binding.normalizer(mode));
                eta_star = eta_star.max(trace_norm(g)? - p.get(mode).inner_re(g));
                residuals.push(r);
            }
            Ok((objective, kkt, eta_star, residuals))
        })()
        .map_err(|e: crate::Error| e.at_iteration(j))?;
        let (objective, kkt, eta_star, residuals) = step;

        let obj_ok = !config.use_obj_stop
            || last_objective.is_some_and(|f| relative_change(objective, f) <= config.tol_obj);
        if kkt <= config.tol_kkt && obj_ok {
            trace.push(IterationRecord {
                outer_index: j,
                objective,
                kkt_cheap: kkt,
                elapsed_seconds: clock.now() - start,
                ..IterationRecord::default()
            });
            status = SolveStatus::Converged;
            break;
        }

        let (next, inner_iterations, new_objective) = (|| {
            let bases = locg_subspace(&p, &residuals, prev.as_ref())?;
            let reduced = ProblemBinding::with_normalization(
                reduced_tensor(binding.tensor(), &bases)?,
                partition.clone(),
                binding.norm(),
                binding.unfold_norms().to_vec(),
            )?;
            let y0: Vec<Matrix<S>> = bases
                .iter()
                .enumerate()
                .map(|(mode, s)| Matrix::identity_columns(s.cols(), partition.rank(mode)))
                .collect();
            inner_config.tol_kkt = config.inner_fraction * kkt;
            let inner = run_sweeps(&reduced, y0, &inner_config, &NoClock)?;
            let new_objective = inner.trace.last().map_or(objective, |r| r.objective);
            let next = bases
                .iter()
                .zip(&inner.factors)
                .map(|(s, y)| {
                    let x = s.matmul(y);
                    if x.orthonormality_error() > DRIFT_TOL {
                        polar_factor(&x).map(|pol| pol.q)
                    } else {
                        Ok(x)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((FactorTuple::new(next), inner.trace.len(), new_objective))
        })()
        .map_err(|e: crate::Error| e.at_iteration(j))?;

        trace.push(IterationRecord {
            outer_index: j,
            objective: new_objective,
            kkt_cheap: kkt,
            inner_iterations: Some(inner_iterations),
            gain_ratio: (eta_star > 0.0).then(|| (new_objective - objective) / eta_star),
            elapsed_seconds: clock.now() - start,
            ..IterationRecord::default()
        });
        prev = Some(core::mem::replace(&mut p, next));
        last_objective = Some(objective);
        if stall.update(new_objective, objective, kkt, config.stall_window) {
            status = SolveStatus::Stalled;
            break;
        }
    }
    finish(binding, p, trace, status)
}

/// Orthonormal bases `S_ℓ` of `range([P_ℓ, R_ℓ, P_ℓ^prev])` whose leading
/// `k_ℓ` columns are exactly `P_ℓ`.
pub fn locg_subspace<S: Scalar>(
    p: &FactorTuple<S>,
    residuals: &[Matrix<S>],
    prev: Option<&FactorTuple<S>>,
) -> Result<Vec<Matrix<S>>> {
    p.factors()
        .iter()
        .zip(residuals)
        .enumerate()
        .map(|(mode, (pl, r))| match prev {
            Some(old) => orth_complement_extend(pl, &Matrix::hcat(&[r, old.get(mode)])?),
            None => orth_complement_extend(pl, r),
        })
        .collect()
}

/// `B ×_1 S_1^H ⋯ ×_m S_m^H`.
pub fn reduced_tensor<S: Scalar>(b: &Tensor<S>, bases: &[Matrix<S>]) -> Result<Tensor<S>> {
    let mut t = b.clone();
    for (mode, s) in bases.iter().enumerate() {
        t = t.mode_multiply_adjoint(s, mode)?;
    }
    Ok(t)
}
