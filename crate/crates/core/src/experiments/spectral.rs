use num_complex::Complex64 as C64;
use serde::Serialize;

use super::trace::two_qubit_entanglement;
use super::{initial_product_state, ExperimentOptions, PeakResult};
use crate::dynamics::DenseEvolver;
use crate::entanglement::{BellMix, PairReducer};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_total_hamiltonian, ChainSpec};

/// Levels closer than this (relative to `max(1, |E|)`) count as one.
const LEVEL_MERGE_TOL: f64 = 1e-9;

/// Overlaps of the pre-quench state with the eigenspaces of `H_T`.
/// Degenerate levels are merged so that each weight is the squared norm of
/// the projection onto one eigenspace, independent of the eigenbasis chosen.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralDecomposition {
    pub ground_energy: f64,
    /// Distinct `E_n - E_0`, ascending.
    pub excitations: Vec<f64>,
    /// `|c_n|^2`, same order as `excitations`.
    pub weights: Vec<f64>,
    /// Indices of the largest and second largest weight.
    pub top: [usize; 2],
    /// `|E_top0 - E_top1|`.
    pub omega: f64,
    #[serde(skip)]
    evolver: Option<DenseEvolver>,
    #[serde(skip)]
    coeffs: Vec<C64>,
}

impl SpectralDecomposition {
    /// Builds a decomposition from bare levels and weights, without the
    /// eigenvectors needed for reconstruction.
    pub fn from_levels(energies: &[f64], weights: &[f64]) -> Result<Self> {
        if energies.len() != weights.len() || energies.len() < 2 {
            return Err(Error::domain("need at least two levels with one weight each"));
        }
        let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let top = top_two(weights);
        Ok(Self {
            ground_energy: e0,
            excitations: energies.iter().map(|e| e - e0).collect(),
            weights: weights.to_vec(),
            top,
            omega: (energies[top[0]] - energies[top[1]]).abs(),
            evolver: None,
            coeffs: Vec::new(),
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn top2_weight_sum(&self) -> f64 {
        self.weights[self.top[0]] + self.weights[self.top[1]]
    }

    /// True when each of the two dominant weights exceeds every other one.
    pub fn two_level_dominance(&self) -> bool {
        let floor = self.weights[self.top[1]];
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.top.contains(i))
            .all(|(_, &w)| w < floor)
    }

    /// `sum_n c_n e^{-i E_n t} |E_n>` in the sector basis.
    pub fn state_at(&self, t: f64) -> Result<Vec<C64>> {
        let ev = self
            .evolver
            .as_ref()
            .ok_or_else(|| Error::domain("decomposition carries no eigenvectors"))?;
        Ok(ev.state_at(&self.coeffs, t))
    }
}

fn top_two(weights: &[f64]) -> [usize; 2] {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // stable sort keeps the lower level first among equal weights
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    [order[0], order[1]]
}

pub fn spectral_decomposition(chain: &ChainSpec, opts: &ExperimentOptions) -> Result<SpectralDecomposition> {
    let psi0 = initial_product_state(chain, opts)?;
    let h = build_total_hamiltonian(chain, psi0.shared_basis())?;
    if h.dim() < 2 {
        return Err(Error::domain("spectral decomposition needs at least two levels"));
    }
    let ev = DenseEvolver::new(&h, opts.eigen.dense_cap)?;
    let coeffs = ev.coefficients(psi0.amplitudes());
    let mut levels: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (&e, c) in ev.spectrum().energies.iter().zip(&coeffs) {
        match levels.last() {
            Some(&last) if e - last <= LEVEL_MERGE_TOL * e.abs().max(1.0) => {
                *weights.last_mut().expect("paired with levels") += c.norm_sqr();
            }
            _ => {
                levels.push(e);
                weights.push(c.norm_sqr());
            }
        }
    }
    let mut d = SpectralDecomposition::from_levels(&levels, &weights)?;
    d.evolver = Some(ev);
    d.coeffs = coeffs;
    Ok(d)
}

/// `E(t)` rebuilt from the eigen-expansion, independent of the Krylov path.
pub fn spectral_trace(
    chain: &ChainSpec,
    decomposition: &SpectralDecomposition,
    times: &[f64],
) -> Result<Vec<(f64, BellMix)>> {
    let ev = decomposition
        .evolver
        .as_ref()
        .ok_or_else(|| Error::domain("decomposition carries no eigenvectors"))?;
    let reducer = PairReducer::new(&ev.spectrum().basis, 0, chain.n_sites() - 1)?;
    Ok(times
        .iter()
        .map(|&t| {
            let amps = ev.state_at(&decomposition.coeffs, t);
            two_qubit_entanglement(reducer.reduce_amplitudes(&amps))
        })
        .collect())
}

/// Compares the measured peak with the first time the dominant relative
/// phase `exp(-i omega t)` reaches -1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferenceReport {
    pub omega: f64,
    pub t_phase: f64,
    pub t_opt: f64,
    /// `|t_opt - t_phase|`.
    pub offset: f64,
    pub top2_weight_sum: f64,
}

pub fn interference_check(spec: &SpectralDecomposition, peak: &PeakResult) -> Result<InterferenceReport> {
    if !(spec.omega > 0.0) {
        return Err(Error::domain(format!("omega must be positive, got {}", spec.omega)));
    }
    let t_phase = std::f64::consts::PI / spec.omega;
    Ok(InterferenceReport {
        omega: spec.omega,
        t_phase,
        t_opt: peak.t_opt,
        offset: (peak.t_opt - t_phase).abs(),
        top2_weight_sum: spec.top2_weight_sum(),
    })
}

#[cfg(test)]
/// Norm of the residual `psi - sum_n c_n |E_n>`, a completeness check.
pub(crate) fn reconstruction_error(d: &SpectralDecomposition, psi: &[C64]) -> Result<f64> {
    let back = d.state_at(0.0)?;
    let diff = nalgebra::DVector::from_iterator(psi.len(), psi.iter().zip(&back).map(|(a, b)| a - b));
    Ok(diff.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_toy_phase_time() {
        let d = SpectralDecomposition::from_levels(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        let peak = PeakResult {
            t_opt: 3.0,
            e_max: 1.0,
            index: 0,
            refined: false,
            window_truncated: false,
        };
        let r = interference_check(&d, &peak).unwrap();
        assert!((r.t_phase - std::f64::consts::PI).abs() < 1e-15);
        assert!((r.offset - (std::f64::consts::PI - 3.0)).abs() < 1e-15);
        assert!(r.top2_weight_sum <= 1.0);
    }

    #[test]
    fn decoupled_chain_is_an_eigenstate() {
        let chain = ChainSpec::symmetric(4, 0.5, 0.0, 1.0);
        let opts = ExperimentOptions::default();
        let d = spectral_decomposition(&chain, &opts).unwrap();
        assert!((d.weights[d.top[0]] - 1.0).abs() < 1e-12);
        assert!((d.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn completeness() {
        let chain = ChainSpec::symmetric(4, 0.5, 0.75, 0.0);
        let opts = ExperimentOptions::default();
        let d = spectral_decomposition(&chain, &opts).unwrap();
        assert!((d.total_weight() - 1.0).abs() < 1e-12);
        let psi = initial_product_state(&chain, &opts).unwrap();
        assert!(reconstruction_error(&d, psi.amplitudes()).unwrap() < 1e-12);
    }
}
