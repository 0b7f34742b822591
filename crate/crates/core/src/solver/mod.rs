//! Alternating polar-factor SCF (NPDo) and its LOCG-accelerated variant.

mod accnpdo;
mod diagnostics;
mod npdo;

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use accnpdo::{accnpdo_solve, accnpdo_solve_with_clock, locg_subspace, reduced_tensor};
pub use diagnostics::{diagnostics_series, SeriesSummary};
pub use npdo::{npdo_solve, npdo_solve_with_clock};

use crate::blocks::{bdiag_extract, core_tensor, FactorTuple};
use crate::linalg::sym;
use crate::matrix::Matrix;
use crate::problem::ProblemBinding;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Factors handed to a solver must be orthonormal to this tolerance.
pub const INIT_ORTHONORMALITY_TOL: f64 = 1e-10;
/// Iterates drifting past this are re-orthonormalized through their polar factor.
pub const DRIFT_TOL: f64 = 1e-12;
/// With diagnostics on, the full KKT residual is also evaluated every this many sweeps.
pub const FULL_KKT_EVERY: usize = 25;
/// Relative objective change below which a sweep counts toward a stall.
pub const STALL_RTOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverConfig {
    /// Tolerance on `|f_j - f_{j-1}| / f_j`, used only when `use_obj_stop` is set.
    pub tol_obj: f64,
    /// Tolerance on the normalized KKT residual.
    pub tol_kkt: f64,
    pub max_outer: usize,
    /// Inner solves stop at this fraction of the current outer KKT residual.
    pub inner_fraction: f64,
    pub max_inner: usize,
    /// Require the objective criterion in addition to the KKT one.
    pub use_obj_stop: bool,
    pub record_diagnostics: bool,
    pub seed: u64,
    /// Consecutive stagnant iterations that end a solve as stalled; 0 disables.
    /// Stagnant means a relative objective change below `STALL_RTOL` with no
    /// new low in the KKT residual.
    pub stall_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_obj: 1e-12,
            tol_kkt: 1e-9,
            max_outer: 2000,
            inner_fraction: 0.125,
            max_inner: 50,
            use_obj_stop: false,
            record_diagnostics: false,
            seed: 0,
            stall_window: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if [self.tol_obj, self.tol_kkt].iter().any(|t| t.is_nan() || *t <= 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.inner_fraction > 0.0 && self.inner_fraction < 1.0) {
            return bad("inner_fraction must lie in (0, 1)");
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration caps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Stalled,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Npdo,
    AccNpdo,
}

impl Method {
    pub fn solve<S: Scalar>(
        self,
        binding: &ProblemBinding<S>,
        init: &FactorTuple<S>,
        config: &SolverConfig,
        clock: &dyn crate::clock::Clock,
    ) -> Result<SolveResult<S>> {
        match self {
            Method::Npdo => npdo_solve_with_clock(binding, init, config, clock),
            Method::AccNpdo => accnpdo_solve_with_clock(binding, init, config, clock),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Npdo => "npdo",
            Method::AccNpdo => "accnpdo",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "npdo" => Ok(Method::Npdo),
            "accnpdo" => Ok(Method::AccNpdo),
            _ => Err(Error::InvalidConfig(format!("unknown method `{s}`"))),
        }
    }
}

/// One outer iteration: a Gauss-Seidel sweep for NPDo, one subspace step for accNPDo.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    /// 1-based.
    pub outer_index: usize,
    /// Objective at the iterate this record ends on.
    pub objective: f64,
    /// KKT residual used for stopping. For NPDo this is the staggered `ε̃`
    /// measured on the iterate the sweep started from; for accNPDo it is the
    /// full residual of that iterate.
    pub kkt_cheap: f64,
    /// Full KKT residual of the iterate this record ends on, when evaluated.
    pub kkt_full: Option<f64>,
    /// Per-mode gains `|Ĝ_ℓ|_tr - Re tr(P_ℓ^H Ĝ_ℓ)` (diagnostics only).
    pub step_gains: Vec<f64>,
    /// Per-mode `|sin Θ(P_ℓ^(j+1), P_ℓ^(j))|_F^2` (diagnostics only).
    pub sin_theta_sq: Vec<f64>,
    /// Per-mode `σ_min(Ĝ_ℓ)` (diagnostics only).
    pub sigma_min: Vec<f64>,
    /// Per-mode `|Ĝ_ℓ - P_ℓ (P_ℓ^H Ĝ_ℓ)|_F^2 / |Ĝ_ℓ|_F^2` (diagnostics only).
    pub projection_residuals: Vec<f64>,
    /// Sweeps taken by the inner solve (accNPDo only).
    pub inner_iterations: Option<usize>,
    /// `(f_{j+1} - f_j) / max_ℓ(|G_ℓ|_tr - Re tr(P_ℓ^H G_ℓ))` (accNPDo only).
    pub gain_ratio: Option<f64>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult<S> {
    pub factors: FactorTuple<S>,
    pub core: Tensor<S>,
    pub blocks: Vec<Tensor<S>>,
    /// `Λ_ℓ = sym(P_ℓ^H G_ℓ)` at the final factors.
    pub multipliers: Vec<Matrix<S>>,
    pub trace: Vec<IterationRecord>,
    pub status: SolveStatus,
}

impl<S> SolveResult<S> {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn objective(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.objective)
    }

    pub fn kkt_cheap(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.kkt_cheap)
    }

    pub fn kkt_full(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.kkt_full)
    }
}

fn check_start<S: Scalar>(binding: &ProblemBinding<S>, init: &FactorTuple<S>, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    binding.check_factors(init)?;
    init.check_orthonormal(INIT_ORTHONORMALITY_TOL)
}

/// `|a - b| / |a|`, with `0 / 0` read as 0.
pub(crate) fn relative_change(new: f64, old: f64) -> f64 {
    let d = libm::fabs(new - old);
    if d == 0.0 {
        0.0
    } else {
        d / libm::fabs(new)
    }
}

/// Counts consecutive stagnant iterations. An iteration is stagnant when the
/// objective barely moves and the KKT residual sets no new low; near a
/// maximizer the objective change is quadratic in the residual, so the first
/// test alone also fires on slow but steady convergence.
#[derive(Debug)]
pub(crate) struct StallCounter {
    run: usize,
    best_kkt: f64,
}

impl Default for StallCounter {
    fn default() -> Self {
        StallCounter { run: 0, best_kkt: f64::INFINITY }
    }
}

impl StallCounter {
    pub fn update(&mut self, new: f64, old: f64, kkt: f64, window: usize) -> bool {
        let improved = kkt < self.best_kkt;
        self.best_kkt = self.best_kkt.min(kkt);
        if relative_change(new, old) < STALL_RTOL && !improved {
            self.run += 1;
        } else {
            self.run = 0;
        }
        window > 0 && self.run >= window
    }
}

/// Core, blocks and multipliers at the final factors. Also returns the full
/// KKT residual, which the final gradients give for free.
fn finish<S: Scalar>(
    binding: &ProblemBinding<S>,
    factors: FactorTuple<S>,
    mut trace: Vec<IterationRecord>,
    status: SolveStatus,
) -> Result<SolveResult<S>> {
    let gradients = binding.gradients(&factors)?;
    let kkt = binding.kkt_from_gradients(&gradients, factors.factors())?;
    let multipliers = gradients
        .iter()
        .zip(factors.factors())
        .map(|(g, p)| sym(&p.adjoint_mul(g)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(last) = trace.last_mut() {
        last.kkt_full = Some(kkt);
    }
    let core = core_tensor(binding.tensor(), &factors)?;
    let blocks = bdiag_extract(&core, binding.partition())?;
    Ok(SolveResult { factors, core, blocks, multipliers, trace, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stall_needs_flat_objective_and_no_kkt_progress() {
        let mut c = StallCounter::default();
        // Flat objective but a falling residual never stalls.
        for j in 0..50 {
            assert!(!c.update(1.0, 1.0, 1e-3 / (j + 1) as f64, 3));
        }
        let mut c = StallCounter::default();
        assert!(!c.update(1.0, 1.0, 1e-3, 3));
        assert!(!c.update(1.0, 1.0, 1e-3, 3));
        assert!(!c.update(1.0, 1.0, 2e-3, 3));
        assert!(c.update(1.0, 1.0, 1e-3, 3));
        let mut c = StallCounter::default();
        assert!((0..20).all(|_| !c.update(1.0, 1.0, 1.0, 0)));
    }
}
