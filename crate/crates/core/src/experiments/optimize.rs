use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trace::peak_from_state;
use super::{check_failures, initial_product_state, linear_grid, ExperimentOptions, PeakResult, TimeWindow};
use crate::error::{Error, Result};
use crate::hamiltonian::ChainSpec;
use crate::state::StateVector;

/// Exhaustive search space over the impurity coupling `J'` (both modules)
/// and the quench bond `J_I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingGrid {
    pub n_half: usize,
    pub delta: f64,
    pub j_prime: Vec<f64>,
    pub j_i: Vec<f64>,
    pub window: TimeWindow,
}

impl CouplingGrid {
    /// `J'` in 0.10..=1.50 and `J_I` in 0.10..=2.00, both in steps of 0.05,
    /// over `Jt` in `[0, 40]`.
    pub fn default_for(n_half: usize, delta: f64) -> Self {
        Self {
            n_half,
            delta,
            j_prime: linear_grid(0.10, 1.50, 0.05),
            j_i: linear_grid(0.10, 2.00, 0.05),
            window: TimeWindow::default(),
        }
    }

    pub(crate) fn sorted(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.j_prime.is_empty() || self.j_i.is_empty() {
            return Err(Error::domain("coupling grids must be nonempty"));
        }
        let sort = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        Ok((sort(&self.j_prime), sort(&self.j_i)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub j_prime: f64,
    pub j_i: f64,
    pub peak: Option<PeakResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeResult {
    pub best_j_prime: f64,
    pub best_j_i: f64,
    pub best: PeakResult,
    /// Every grid point, `J'` major.
    pub surface: Vec<SurfacePoint>,
    pub failures: usize,
}

/// Peak entanglement at every `(J', J_I)` grid point, in `J'`-major order.
pub(crate) fn evaluate_surface(grid: &CouplingGrid, opts: &ExperimentOptions) -> Result<Vec<SurfacePoint>> {
    let (jps, jis) = grid.sorted()?;
    let times = grid.window.grid()?;
    opts.install(|| {
        // module ground states only depend on J'
        let initial: Vec<Result<StateVector>> = jps
            .par_iter()
            .map(|&jp| initial_product_state(&ChainSpec::symmetric(grid.n_half, jp, jis[0], grid.delta), opts))
            .collect();
        // invalid parameters abort; numerical failures are counted per point
        for r in &initial {
            if let Err(Error::Domain(msg)) = r {
                return Err(Error::Domain(msg.clone()));
            }
        }
        let tasks: Vec<(usize, usize)> = (0..jps.len())
            .flat_map(|a| (0..jis.len()).map(move |b| (a, b)))
            .collect();
        Ok(tasks
            .par_iter()
            .map(|&(a, b)| {
                let chain = ChainSpec::symmetric(grid.n_half, jps[a], jis[b], grid.delta);
                let res = match &initial[a] {
                    Ok(psi0) => peak_from_state(&chain, psi0, &times, opts),
                    Err(e) => Err(Error::domain(e.to_string())),
                };
                match res {
                    Ok(peak) => SurfacePoint {
                        j_prime: jps[a],
                        j_i: jis[b],
                        peak: Some(peak),
                        error: None,
                    },
                    Err(e) => SurfacePoint {
                        j_prime: jps[a],
                        j_i: jis[b],
                        peak: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect())
    })
}

/// Exhaustive grid search for the couplings maximizing `E_max`. Ties go to
/// the smaller `J'`, then the smaller `J_I`.
pub fn optimize_couplings(grid: &CouplingGrid, opts: &ExperimentOptions) -> Result<OptimizeResult> {
    let surface = evaluate_surface(grid, opts)?;
    let errors: Vec<String> = surface.iter().filter_map(|p| p.error.clone()).collect();
    check_failures(&errors, surface.len(), opts.max_failure_fraction)?;
    let mut best: Option<(usize, PeakResult)> = None;
    for (i, p) in surface.iter().enumerate() {
        let Some(peak) = p.peak else { continue };
        if best.is_none_or(|(_, b)| peak.e_max > b.e_max) {
            best = Some((i, peak));
        }
    }
    let (idx, peak) = best.ok_or_else(|| Error::TooManyFailures {
        failed: surface.len(),
        total: surface.len(),
        first: errors.first().cloned().unwrap_or_default(),
    })?;
    Ok(OptimizeResult {
        best_j_prime: surface[idx].j_prime,
        best_j_i: surface[idx].j_i,
        best: peak,
        failures: errors.len(),
        surface,
    })
}
