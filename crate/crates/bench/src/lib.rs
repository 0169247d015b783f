//! Shared fixtures for the kernel benchmarks.

use qamp_core::experiments::{initial_product_state, ExperimentOptions};
use qamp_core::{build_total_hamiltonian, ChainSpec, SparseOperator, StateVector};

/// Post-quench Hamiltonian and initial state of a symmetric chain.
pub fn quench_fixture(n_half: usize, delta: f64) -> (SparseOperator, StateVector) {
    let chain = ChainSpec::symmetric(n_half, 0.4, 0.5, delta);
    let opts = ExperimentOptions::default();
    let psi = initial_product_state(&chain, &opts).expect("valid fixture chain");
    let h = build_total_hamiltonian(&chain, psi.shared_basis()).expect("valid fixture chain");
    (h, psi)
}

/// Module Hamiltonian in its half-filled sector.
pub fn module_fixture(n: usize, delta: f64) -> SparseOperator {
    let spec = qamp_core::ModuleSpec::new(n, 0.4, delta);
    let basis = std::sync::Arc::new(qamp_core::SectorBasis::half_filled(n).expect("fits in a word"));
    qamp_core::build_module_hamiltonian(&spec, basis).expect("valid fixture module")
}
