//! Dense reference constructions shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use qamp_core::{ChainSpec, Complex64, ModuleSpec, SectorBasis, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn chain(nl: usize, nr: usize, j_prime: f64, j_i: f64, delta: f64) -> ChainSpec {
    ChainSpec {
        left: ModuleSpec::new(nl, j_prime, delta),
        right: ModuleSpec::new(nr, j_prime, delta),
        j_i,
        bond_factors: None,
    }
}

/// Full `2^N` Hamiltonian from explicit Pauli tensor products.
pub fn pauli_oracle(chain: &ChainSpec) -> DMatrix<f64> {
    let (nl, nr) = (chain.left.n_sites, chain.right.n_sites);
    let n = nl + nr;
    let mut strengths = Vec::new();
    for (k, m) in [(0, &chain.left), (1, &chain.right)] {
        let mut s: Vec<f64> = (0..m.n_sites - 1)
            .map(|b| if b == 0 || b == m.n_sites - 2 { m.j_prime * m.j } else { m.j })
            .collect();
        if k == 1 {
            s.reverse();
        }
        strengths.push(s);
    }
    let mut bonds = strengths[0].clone();
    bonds.push(chain.j_i * chain.left.j);
    bonds.extend(&strengths[1]);
    let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let iy = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let id = DMatrix::<f64>::identity(2, 2);
    // site b is bit b, so the first Kronecker factor is site n-1; up = |1> gets Z = +1
    let z = -z;
    let product = |a: usize, op: &DMatrix<f64>| {
        let mut m = DMatrix::<f64>::identity(1, 1);
        for site in (0..n).rev() {
            let f = if site == a || site == a + 1 { op } else { &id };
            m = m.kronecker(f);
        }
        m
    };
    let mut h = DMatrix::<f64>::zeros(1 << n, 1 << n);
    for (a, &s) in bonds.iter().enumerate() {
        // (iY)(iY) = -YY
        h += (product(a, &x) - product(a, &iy) + product(a, &z) * chain.left.delta) * s;
    }
    h
}

pub fn random_state(basis: Arc<SectorBasis>, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<Complex64> = (0..basis.len())
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let mut v = StateVector::new(basis, amps).unwrap();
    v.normalize().unwrap();
    v
}
