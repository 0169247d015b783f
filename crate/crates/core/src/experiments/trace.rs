use std::sync::Arc;

use serde::Serialize;

use super::{joint_basis, ExperimentOptions, PeakResult, PeakRule, TimeWindow};
use crate::basis::{embed_into, SectorBasis};
use crate::dynamics::{KrylovPropagator, KrylovStats};
use crate::eigensolve::{lowest_k, EigenPair, DEGENERACY_TOL};
use crate::entanglement::{bell_decompose, entanglement_e, BellMix, EntanglementValue, PairReducer, TwoQubitDensity};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_module_hamiltonian_with, build_total_hamiltonian, ChainSpec, ModuleSpec};
use crate::state::StateVector;

/// End-to-end entanglement `E(t)` between the outer impurities.
#[derive(Debug, Clone, Serialize)]
pub struct TraceSeries {
    pub chain: ChainSpec,
    pub times: Vec<f64>,
    pub e: Vec<f64>,
    pub bell: Vec<BellMix>,
    pub krylov: KrylovStats,
}

impl TraceSeries {
    pub fn max_bell_residual(&self) -> f64 {
        self.bell.iter().map(|b| b.residual).fold(0.0, f64::max)
    }
}

/// Ground state of one module in its half-filled sector, refusing
/// degenerate or misplaced ground states.
pub(crate) fn module_ground_state(
    spec: &ModuleSpec,
    factors: Option<&[f64]>,
    opts: &ExperimentOptions,
) -> Result<EigenPair> {
    let n = spec.n_sites;
    let half = Arc::new(SectorBasis::half_filled(n)?);
    let h = build_module_hamiltonian_with(spec, factors, half)?;
    let low = lowest_k(&h, 2.min(h.dim()), &opts.eigen)?;
    if low.len() > 1 && low[1].energy - low[0].energy < DEGENERACY_TOL {
        return Err(Error::DegenerateGround {
            gap: low[1].energy - low[0].energy,
        });
    }
    // n/2 - 1 mirrors n/2 + 1 under a global spin flip
    let up = Arc::new(SectorBasis::new(n, n / 2 + 1)?);
    let h_up = build_module_hamiltonian_with(spec, factors, up)?;
    let e_up = lowest_k(&h_up, 1, &opts.eigen)?[0].energy;
    if e_up - low[0].energy < DEGENERACY_TOL {
        return Err(Error::DegenerateGround {
            gap: e_up - low[0].energy,
        });
    }
    let mut low = low;
    Ok(low.swap_remove(0))
}

/// `|GS_L> ⊗ |GS_R>` on the joint chain, using the disordered module bonds
/// when the chain carries bond factors.
pub fn initial_product_state(chain: &ChainSpec, opts: &ExperimentOptions) -> Result<StateVector> {
    chain.validate()?;
    let left = module_ground_state(&chain.left, chain.left_factors().as_deref(), opts)?;
    let right = module_ground_state(&chain.right, chain.right_factors().as_deref(), opts)?;
    embed_into(&left.vector, &right.vector, joint_basis(chain.n_sites())?)
}

pub(crate) fn two_qubit_entanglement(m: nalgebra::Matrix4<num_complex::Complex64>) -> (f64, BellMix) {
    let mix = bell_decompose(&TwoQubitDensity(m));
    (entanglement_e(&mix).e, mix)
}

/// Evolves the chain's initial product state under `H_T` and records the
/// outer-impurity entanglement at every sample time.
pub fn entanglement_trace(chain: &ChainSpec, times: &[f64], opts: &ExperimentOptions) -> Result<TraceSeries> {
    let psi0 = initial_product_state(chain, opts)?;
    trace_from_state(chain, &psi0, times, opts)
}

pub(crate) fn trace_from_state(
    chain: &ChainSpec,
    psi0: &StateVector,
    times: &[f64],
    opts: &ExperimentOptions,
) -> Result<TraceSeries> {
    sample_trace(chain, psi0, times, opts, false)
}

/// Peak of the trace started from `psi0`. Under [`PeakRule::First`] the
/// propagation stops once the first turning point is bracketed.
pub(crate) fn peak_from_state(
    chain: &ChainSpec,
    psi0: &StateVector,
    times: &[f64],
    opts: &ExperimentOptions,
) -> Result<PeakResult> {
    let trace = sample_trace(chain, psi0, times, opts, opts.peak_rule == PeakRule::First)?;
    Ok(opts.peak(&trace.times, &trace.e))
}

fn sample_trace(
    chain: &ChainSpec,
    psi0: &StateVector,
    times: &[f64],
    opts: &ExperimentOptions,
    stop_at_turn: bool,
) -> Result<TraceSeries> {
    let basis = psi0.shared_basis();
    let h = build_total_hamiltonian(chain, basis.clone())?;
    let reducer = PairReducer::new(&basis, 0, chain.n_sites() - 1)?;
    let mut e: Vec<f64> = Vec::with_capacity(times.len());
    let mut bell = Vec::with_capacity(times.len());
    let mut prop = KrylovPropagator::new(&h, opts.krylov);
    let mut last_t = 0.0;
    prop.trajectory_while(psi0.amplitudes(), times, |i, amps| {
        let (ei, mix) = two_qubit_entanglement(reducer.reduce_amplitudes(amps));
        e.push(ei);
        bell.push(mix);
        last_t = times[i];
        let n = e.len();
        let turned = n >= 3 && e[n - 2] > 0.0 && e[n - 2] >= e[n - 3] && e[n - 2] > e[n - 1];
        Ok(!(stop_at_turn && turned))
    })
    .map_err(|err| Error::AtTime {
        t: last_t,
        source: Box::new(err),
    })?;
    Ok(TraceSeries {
        chain: chain.clone(),
        times: times[..e.len()].to_vec(),
        e,
        bell,
        krylov: prop.stats(),
    })
}

/// Peak of `E(t)` over a window.
pub fn peak_of_chain(chain: &ChainSpec, window: &TimeWindow, opts: &ExperimentOptions) -> Result<PeakResult> {
    let times = window.grid()?;
    let psi0 = initial_product_state(chain, opts)?;
    peak_from_state(chain, &psi0, &times, opts)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StaticEntanglement {
    pub value: EntanglementValue,
    pub bell: BellMix,
}

/// Entanglement between the two impurities of a single module's ground state.
pub fn static_end_entanglement(spec: &ModuleSpec, opts: &ExperimentOptions) -> Result<StaticEntanglement> {
    let gs = module_ground_state(spec, None, opts)?;
    let reducer = PairReducer::new(gs.vector.basis(), 0, spec.n_sites - 1)?;
    let mix = bell_decompose(&TwoQubitDensity(reducer.reduce_amplitudes(gs.vector.amplitudes())));
    Ok(StaticEntanglement {
        value: entanglement_e(&mix),
        bell: mix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stop_keeps_the_first_peak() {
        let chain = ChainSpec::symmetric(4, 0.5, 0.75, 1.0);
        let times = TimeWindow::new(20.0, 401).grid().unwrap();
        let opts = ExperimentOptions {
            peak_rule: PeakRule::First,
            ..Default::default()
        };
        let psi0 = initial_product_state(&chain, &opts).unwrap();
        let full = trace_from_state(&chain, &psi0, &times, &opts).unwrap();
        let cut = sample_trace(&chain, &psi0, &times, &opts, true).unwrap();
        assert!(cut.e.len() < full.e.len() / 2);
        assert_eq!(&full.e[..cut.e.len()], &cut.e[..]);
        assert_eq!(opts.peak(&full.times, &full.e), peak_from_state(&chain, &psi0, &times, &opts).unwrap());
    }
}
