use alloc::vec::Vec;

use super::{check_start, finish, relative_change, IterationRecord, SolveResult, SolveStatus, SolverConfig, StallCounter, FULL_KKT_EVERY};
use crate::blocks::FactorTuple;
use crate::clock::{Clock, NoClock};
use crate::linalg::polar_factor;
use crate::matrix::Matrix;
use crate::problem::{normalized, objective_from_contractions, residual_from_gradient, ProblemBinding, SuffixCache};
use crate::scalar::Scalar;
use crate::Result;

/// Alternating NPDo: each sweep replaces `P_ℓ`, `ℓ = 1..m` in turn, by the
/// orthonormal polar factor of the partial gradient at the freshest factors.
///
/// Stops once the staggered KKT residual `ε̃` falls to `tol_kkt` (and, if
/// enabled, the relative objective change to `tol_obj`).
pub fn npdo_solve<S: Scalar>(
    binding: &ProblemBinding<S>,
    init: &FactorTuple<S>,
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    npdo_solve_with_clock(binding, init, config, &NoClock)
}

pub fn npdo_solve_with_clock<S: Scalar>(
    binding: &ProblemBinding<S>,
    init: &FactorTuple<S>,
    config: &SolverConfig,
    clock: &dyn Clock,
) -> Result<SolveResult<S>> {
    check_start(binding, init, config)?;
    let run = run_sweeps(binding, init.factors().to_vec(), config, clock)?;
    finish(binding, FactorTuple::new(run.factors), run.trace, run.status)
}

pub(crate) struct SweepRun<S> {
    pub factors: Vec<Matrix<S>>,
    pub trace: Vec<IterationRecord>,
    pub status: SolveStatus,
}

pub(crate) fn run_sweeps<S: Scalar>(
    binding: &ProblemBinding<S>,
    mut p: Vec<Matrix<S>>,
    config: &SolverConfig,
    clock: &dyn Clock,
) -> Result<SweepRun<S>> {
    let start = clock.now();
    let mut trace = Vec::new();
    let mut stall = StallCounter::default();
    let mut status = SolveStatus::MaxIter;
    for j in 1..=config.max_outer {
        let out = sweep(binding, &mut p, config.record_diagnostics).map_err(|e| e.at_iteration(j))?;
        let kkt_full = if config.record_diagnostics && j % FULL_KKT_EVERY == 0 {
            let tuple = FactorTuple::new(p.clone());
            Some(binding.kkt_residual_full(&tuple).map_err(|e| e.at_iteration(j))?)
        } else {
            None
        };
        trace.push(IterationRecord {
            outer_index: j,
            objective: out.objective_end,
            kkt_cheap: out.kkt,
            kkt_full,
            step_gains: out.gains,
            sin_theta_sq: out.sin_theta_sq,
            sigma_min: out.sigma_min,
            projection_residuals: out.projection,
            inner_iterations: None,
            gain_ratio: None,
            elapsed_seconds: clock.now() - start,
        });
        let obj_ok = !config.use_obj_stop
            || relative_change(out.objective_end, out.objective_start) <= config.tol_obj;
        if out.kkt <= config.tol_kkt && obj_ok {
            status = SolveStatus::Converged;
            break;
        }
        if stall.update(out.objective_end, out.objective_start, out.kkt, config.stall_window) {
            status = SolveStatus::Stalled;
            break;
        }
    }
    Ok(SweepRun { factors: p, trace, status })
}

struct SweepOutcome {
    objective_start: f64,
    objective_end: f64,
    kkt: f64,
    gains: Vec<f64>,
    sin_theta_sq: Vec<f64>,
    sigma_min: Vec<f64>,
    projection: Vec<f64>,
}

/// One Gauss-Seidel sweep, updating `p` in place.
fn sweep<S: Scalar>(binding: &ProblemBinding<S>, p: &mut [Matrix<S>], diagnostics: bool) -> Result<SweepOutcome> {
    let b = binding.tensor();
    let partition = binding.partition();
    let m = b.order();
    let cache = SuffixCache::build(b, p, partition)?;
    let mut out = SweepOutcome {
        objective_start: 0.0,
        objective_end: 0.0,
        kkt: 0.0,
        gains: Vec::new(),
        sin_theta_sq: Vec::new(),
        sigma_min: Vec::new(),
        projection: Vec::new(),
    };
    for mode in 0..m {
        let pass = cache.mode_pass(b, p, partition, mode)?;
        if mode == 0 {
            out.objective_start = pass.objective;
        }
        let g = &pass.gradient;
        let r = residual_from_gradient(&p[mode], g)?;
        out.kkt += normalized(r.frobenius_norm(), binding.normalizer(mode));
        let polar = polar_factor(g)?;
        let old = core::mem::replace(&mut p[mode], polar.q);
        if diagnostics {
            let new = &p[mode];
            out.gains.push(polar.singular_values.iter().sum::<f64>() - old.inner_re(g));
            out.sin_theta_sq.push((old.cols() as f64 - old.adjoint_mul(new).norm_sqr()).max(0.0));
            out.sigma_min.push(polar.singular_values.last().copied().unwrap_or(0.0));
            let proj = g.sub(&old.matmul(&old.adjoint_mul(g))).norm_sqr();
            out.projection.push(normalized(proj, g.norm_sqr()));
        }
        if mode == m - 1 {
            out.objective_end = objective_from_contractions(&pass.contractions, &p[mode], partition, mode)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::BlockPartition;
    use crate::random::NormalRng;
    use crate::tensor::Tensor;
    use crate::Complex64;

    fn setup<S: Scalar>(seed: u64, dims: &[usize], part: &str) -> (ProblemBinding<S>, FactorTuple<S>) {
        let partition: BlockPartition = part.parse().unwrap();
        let mut rng = NormalRng::seed_from(seed);
        let b = rng.tensor(dims);
        let init = FactorTuple::random(dims, &partition.ranks(), &mut rng).unwrap();
        (ProblemBinding::new(b, partition).unwrap(), init)
    }

    #[test]
    fn zero_tensor_converges_immediately() {
        let part: BlockPartition = "1,1x1,1x1,1".parse().unwrap();
        let binding = ProblemBinding::new(Tensor::<f64>::zeros(&[4, 4, 4]).unwrap(), part).unwrap();
        let init = FactorTuple::identity_columns(&[4, 4, 4], &[2, 2, 2]);
        let res = npdo_solve(&binding, &init, &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Converged);
        assert_eq!(res.iterations(), 1);
        assert!(res.trace.iter().all(|r| r.objective == 0.0));
    }

    #[test]
    fn sweep_objectives_match_direct_evaluation() {
        let (binding, init) = setup::<Complex64>(1, &[6, 5, 4], "1,2x2,1x1,1");
        let config = SolverConfig { max_outer: 5, ..SolverConfig::default() };
        let res = npdo_solve(&binding, &init, &config).unwrap();
        let mut prev = binding.objective(&init).unwrap();
        for r in &res.trace {
            assert!(r.objective >= prev - 1e-12 * prev.max(1.0));
            prev = r.objective;
        }
        let direct = binding.objective(&res.factors).unwrap();
        assert!((direct - res.objective()).abs() <= 1e-12 * direct);
        assert!(res.factors.orthonormality_error() < 1e-12);
        for lam in &res.multipliers {
            assert!(lam.sub(&lam.adjoint()).frobenius_norm() == 0.0);
        }
    }

    #[test]
    fn gains_are_nonnegative_and_bound_the_increase() {
        let (binding, init) = setup::<f64>(2, &[7, 6, 5], "1,1x2,1x1,2");
        let config = SolverConfig { max_outer: 8, record_diagnostics: true, ..SolverConfig::default() };
        let res = npdo_solve(&binding, &init, &config).unwrap();
        let scale = binding.norm() * binding.norm();
        let mut prev = binding.objective(&init).unwrap();
        for r in &res.trace {
            assert_eq!(r.step_gains.len(), 3);
            assert!(r.step_gains.iter().all(|&g| g >= -1e-10 * scale));
            let total: f64 = r.step_gains.iter().sum();
            assert!(r.objective >= prev + total - 1e-9 * scale);
            prev = r.objective;
        }
    }

    #[test]
    fn invalid_init_is_rejected() {
        let (binding, _) = setup::<f64>(3, &[5, 5, 5], "1,1x1,1x1,1");
        let bad = FactorTuple::new(alloc::vec![Matrix::zeros(5, 2), Matrix::zeros(5, 2), Matrix::zeros(5, 2)]);
        assert!(npdo_solve(&binding, &bad, &SolverConfig::default()).is_err());
        let short = FactorTuple::<f64>::identity_columns(&[5, 5, 5], &[1, 2, 2]);
        assert!(npdo_solve(&binding, &short, &SolverConfig::default()).is_err());
        let init = FactorTuple::identity_columns(&[5, 5, 5], &[2, 2, 2]);
        let cfg = SolverConfig { inner_fraction: 1.5, ..SolverConfig::default() };
        assert!(npdo_solve(&binding, &init, &cfg).is_err());
    }

    #[test]
    fn full_kkt_recorded_periodically() {
        let (binding, init) = setup::<f64>(4, &[6, 6, 6], "2x2x2");
        let config = SolverConfig { max_outer: 30, record_diagnostics: true, tol_kkt: 1e-30, stall_window: 0, ..SolverConfig::default() };
        let res = npdo_solve(&binding, &init, &config).unwrap();
        assert_eq!(res.status, SolveStatus::MaxIter);
        assert!(res.trace[24].kkt_full.is_some());
        assert!(res.trace[23].kkt_full.is_none());
        assert!(res.trace[29].kkt_full.is_some());
    }
}
