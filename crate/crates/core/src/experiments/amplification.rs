use serde::Serialize;

use super::optimize::evaluate_surface;
use super::{check_failures, static_end_entanglement, CouplingGrid, ExperimentOptions, PeakResult};
use crate::error::Result;
use crate::hamiltonian::ModuleSpec;

/// Static versus dynamic entanglement at one impurity coupling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplificationRow {
    pub j_prime: f64,
    /// End-to-end entanglement of one module's ground state.
    pub e_static: f64,
    /// Best `E_max` over the `J_I` grid.
    pub e_max: f64,
    pub best_j_i: f64,
    pub t_opt: f64,
    /// `(J_I, peak)` for every quench bond on the grid, failed points omitted.
    pub per_j_i: Vec<(f64, PeakResult)>,
}

impl AmplificationRow {
    pub fn amplified(&self) -> bool {
        self.e_max >= self.e_static
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplificationScan {
    pub n_half: usize,
    pub delta: f64,
    pub rows: Vec<AmplificationRow>,
    pub failures: usize,
}

/// For each `J'`, compares a single module's static end-to-end entanglement
/// with the dynamic peak maximized over `J_I`.
pub fn amplification_scan(grid: &CouplingGrid, opts: &ExperimentOptions) -> Result<AmplificationScan> {
    let surface = evaluate_surface(grid, opts)?;
    let errors: Vec<String> = surface.iter().filter_map(|p| p.error.clone()).collect();
    check_failures(&errors, surface.len(), opts.max_failure_fraction)?;
    let (jps, _) = grid.sorted()?;
    let mut rows = Vec::with_capacity(jps.len());
    for jp in jps {
        let module = ModuleSpec::new(grid.n_half, jp, grid.delta);
        let e_static = static_end_entanglement(&module, opts)?.value.e;
        let per_j_i: Vec<(f64, PeakResult)> = surface
            .iter()
            .filter(|p| p.j_prime == jp)
            .filter_map(|p| p.peak.map(|pk| (p.j_i, pk)))
            .collect();
        let mut best: Option<(f64, PeakResult)> = None;
        for &(ji, pk) in &per_j_i {
            if best.is_none_or(|(_, b)| pk.e_max > b.e_max) {
                best = Some((ji, pk));
            }
        }
        let (best_j_i, peak) = match best {
            Some(b) => b,
            None => continue,
        };
        rows.push(AmplificationRow {
            j_prime: jp,
            e_static,
            e_max: peak.e_max,
            best_j_i,
            t_opt: peak.t_opt,
            per_j_i,
        });
    }
    Ok(AmplificationScan {
        n_half: grid.n_half,
        delta: grid.delta,
        rows,
        failures: errors.len(),
    })
}
