use alloc::vec::Vec;

use super::IterationRecord;
use crate::{Error, Result};

/// Partial sums of the `2m` convergent series of an NPDo run, per mode:
/// `Σ_j σ_min(Ĝ_ℓ) |sin Θ(P_ℓ^(j+1), P_ℓ^(j))|_F^2` and
/// `Σ_j σ_min(Ĝ_ℓ) |Ĝ_ℓ - P_ℓ (P_ℓ^H Ĝ_ℓ)|_F^2 / |Ĝ_ℓ|_F^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    /// `sin_theta_sums[ℓ][j]`, partial sum through record `j`.
    pub sin_theta_sums: Vec<Vec<f64>>,
    /// `projection_terms[ℓ][j]`, the individual terms of the second series.
    pub projection_terms: Vec<Vec<f64>>,
    pub projection_sums: Vec<Vec<f64>>,
}

impl SeriesSummary {
    fn series(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.sin_theta_sums.iter().chain(&self.projection_sums)
    }

    /// Final value of each of the `2m` series.
    pub fn totals(&self) -> Vec<f64> {
        self.series().map(|s| s.last().copied().unwrap_or(0.0)).collect()
    }

    /// All partial sums finite and nondecreasing.
    pub fn is_well_formed(&self) -> bool {
        self.series()
            .all(|s| s.iter().all(|x| x.is_finite()) && s.windows(2).all(|w| w[1] >= w[0]))
    }

    /// Largest share of a series total contributed by its last quarter of
    /// records. Series with a zero total contribute 0.
    pub fn last_quarter_fraction(&self) -> f64 {
        self.series()
            .map(|s| {
                let n = s.len();
                let total = s.last().copied().unwrap_or(0.0);
                if total <= 0.0 {
                    return 0.0;
                }
                let cut = n - n / 4;
                let before = if cut == 0 { 0.0 } else { s[cut - 1] };
                (total - before) / total
            })
            .fold(0.0, f64::max)
    }
}

/// Builds the series from a trace recorded with diagnostics on.
pub fn diagnostics_series(trace: &[IterationRecord]) -> Result<SeriesSummary> {
    let m = trace.first().map_or(0, |r| r.sigma_min.len());
    let complete = |r: &IterationRecord| {
        r.sigma_min.len() == m && r.sin_theta_sq.len() == m && r.projection_residuals.len() == m
    };
    if m == 0 || !trace.iter().all(complete) {
        return Err(Error::MissingDiagnostics);
    }
    let mut out = SeriesSummary {
        sin_theta_sums: alloc::vec![Vec::with_capacity(trace.len()); m],
        projection_terms: alloc::vec![Vec::with_capacity(trace.len()); m],
        projection_sums: alloc::vec![Vec::with_capacity(trace.len()); m],
    };
    let mut acc1 = alloc::vec![0.0; m];
    let mut acc2 = alloc::vec![0.0; m];
    for r in trace {
        for l in 0..m {
            acc1[l] += r.sigma_min[l] * r.sin_theta_sq[l];
            let term = r.sigma_min[l] * r.projection_residuals[l];
            acc2[l] += term;
            out.sin_theta_sums[l].push(acc1[l]);
            out.projection_terms[l].push(term);
            out.projection_sums[l].push(acc2[l]);
        }
    }
    Ok(out)
}
