//! XXZ module and chain Hamiltonians restricted to magnetization sectors.
//!
//! Every bond carries `X_a X_b + Y_a Y_b + delta Z_a Z_b` in Pauli operators,
//! so an antiparallel pair hops with amplitude `2 * strength` and each bond
//! adds `+-delta * strength` to the diagonal.

use std::ops::{AddAssign, Mul};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::{SectorBasis, SiteMap};
use crate::error::{Error, Result};
use crate::state::StateVector;

/// Above this many stored entries the operator switches to on-the-fly
/// application.
pub const DEFAULT_NONZERO_BUDGET: usize = 40_000_000;

/// One XXZ module: a bulk chain with an impurity bond at each end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub n_sites: usize,
    /// Bulk exchange, the energy unit.
    pub j: f64,
    /// Impurity bond relative to `j`.
    pub j_prime: f64,
    pub delta: f64,
    /// Accept anisotropies outside `[-1, 1]`.
    #[serde(default)]
    pub allow_any_delta: bool,
}

impl ModuleSpec {
    pub fn new(n_sites: usize, j_prime: f64, delta: f64) -> Self {
        Self {
            n_sites,
            j: 1.0,
            j_prime,
            delta,
            allow_any_delta: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 4 || !self.n_sites.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "module needs an even number of sites >= 4, got {}",
                self.n_sites
            )));
        }
        if !(self.j > 0.0 && self.j.is_finite()) {
            return Err(Error::domain(format!("bulk exchange J must be > 0, got {}", self.j)));
        }
        if !(self.j_prime > 0.0 && self.j_prime.is_finite()) {
            return Err(Error::domain(format!(
                "impurity coupling J' must be > 0, got {}",
                self.j_prime
            )));
        }
        if !self.delta.is_finite() || (!self.allow_any_delta && self.delta.abs() > 1.0) {
            return Err(Error::domain(format!(
                "anisotropy delta = {} outside [-1, 1] (set allow_any_delta to override)",
                self.delta
            )));
        }
        Ok(())
    }

    /// Bonds in label order; bond `i` joins labels `i+1` and `i+2`.
    /// `factors`, if given, multiplies each bond.
    pub fn bonds(&self, factors: Option<&[f64]>) -> Vec<Bond> {
        let n = self.n_sites;
        (0..n - 1)
            .map(|i| {
                let rel = if i == 0 || i == n - 2 { self.j_prime } else { 1.0 };
                let f = factors.map_or(1.0, |f| f[i]);
                Bond {
                    a: i,
                    b: i + 1,
                    strength: self.j * rel * f,
                }
            })
            .collect()
    }
}

/// Two modules joined by a quench bond between their inner ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub left: ModuleSpec,
    pub right: ModuleSpec,
    /// Quench bond relative to `j`.
    pub j_i: f64,
    /// Multiplicative factors, one per bond in linear order (`N-1` entries;
    /// entry `N_L - 1` is the quench bond).
    #[serde(default)]
    pub bond_factors: Option<Vec<f64>>,
}

impl ChainSpec {
    /// Two identical modules of `n_half` sites.
    pub fn symmetric(n_half: usize, j_prime: f64, j_i: f64, delta: f64) -> Self {
        let m = ModuleSpec::new(n_half, j_prime, delta);
        Self {
            left: m,
            right: m,
            j_i,
            bond_factors: None,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.left.n_sites + self.right.n_sites
    }

    pub fn site_map(&self) -> SiteMap {
        SiteMap::new(self.left.n_sites, self.right.n_sites)
    }

    pub fn n_bonds(&self) -> usize {
        self.n_sites() - 1
    }

    /// Linear index of the quench bond.
    pub fn quench_bond(&self) -> usize {
        self.left.n_sites - 1
    }

    pub fn validate(&self) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        if self.left.j != self.right.j || self.left.delta != self.right.delta {
            return Err(Error::domain(
                "modules must share the bulk exchange J and anisotropy delta",
            ));
        }
        if !(self.j_i >= 0.0 && self.j_i.is_finite()) {
            return Err(Error::domain(format!("quench bond J_I must be >= 0, got {}", self.j_i)));
        }
        if let Some(f) = &self.bond_factors {
            if f.len() != self.n_bonds() {
                return Err(Error::domain(format!(
                    "{} bond factors for a chain with {} bonds",
                    f.len(),
                    self.n_bonds()
                )));
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::domain("non-finite bond factor"));
            }
        }
        Ok(())
    }

    pub fn with_j_i(&self, j_i: f64) -> Self {
        Self { j_i, ..self.clone() }
    }

    /// Bond factors of the left module, in its label order.
    pub fn left_factors(&self) -> Option<Vec<f64>> {
        self.bond_factors
            .as_ref()
            .map(|f| f[..self.left.n_sites - 1].to_vec())
    }

    /// Bond factors of the right module, in its label order.
    pub fn right_factors(&self) -> Option<Vec<f64>> {
        let n = self.n_sites();
        self.bond_factors
            .as_ref()
            .map(|f| (0..self.right.n_sites - 1).map(|i| f[n - 2 - i]).collect())
    }

    /// All bonds of `H_L + H_R + H_I` on the linear chain.
    pub fn bonds(&self) -> Vec<Bond> {
        let map = self.site_map();
        let n = self.n_sites();
        let mut bonds = self.left.bonds(self.left_factors().as_deref());
        for b in self.right.bonds(self.right_factors().as_deref()) {
            bonds.push(Bond {
                a: n - 1 - b.b,
                b: n - 1 - b.a,
                strength: b.strength,
            });
        }
        if self.j_i != 0.0 {
            let q = self.quench_bond();
            let f = self.bond_factors.as_ref().map_or(1.0, |f| f[q]);
            bonds.push(Bond {
                a: q,
                b: q + 1,
                strength: self.left.j * self.j_i * f,
            });
        }
        debug_assert!(bonds.iter().all(|b| b.b < map.total()));
        bonds
    }
}

/// An XXZ coupling `strength * (XX + YY + delta ZZ)` between linear sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub strength: f64,
}

#[derive(Debug, Clone)]
enum Storage {
    Csr {
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        vals: Vec<f64>,
    },
    /// Diagonal stored, hops generated per application.
    OnTheFly { bonds: Vec<Bond>, diag: Vec<f64> },
}

/// Real symmetric Hamiltonian on one magnetization sector.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    basis: Arc<SectorBasis>,
    storage: Storage,
}

/// Anything a real sparse matrix can act on.
pub trait Amplitude: Copy + Default + AddAssign + Mul<f64, Output = Self> + Send + Sync {}
impl Amplitude for f64 {}
impl Amplitude for C64 {}

impl SparseOperator {
    /// XXZ operator for `bonds` with anisotropy `delta`.
    pub fn from_bonds(basis: Arc<SectorBasis>, bonds: &[Bond], delta: f64) -> Result<Self> {
        Self::from_bonds_with_budget(basis, bonds, delta, DEFAULT_NONZERO_BUDGET)
    }

    pub fn from_bonds_with_budget(
        basis: Arc<SectorBasis>,
        bonds: &[Bond],
        delta: f64,
        nonzero_budget: usize,
    ) -> Result<Self> {
        let n = basis.n_sites();
        if let Some(b) = bonds.iter().find(|b| b.a >= n || b.b >= n || b.a == b.b) {
            return Err(Error::domain(format!(
                "bond ({}, {}) invalid on {n} sites",
                b.a, b.b
            )));
        }
        let dim = basis.len();
        if dim > u32::MAX as usize {
            return Err(Error::domain("sector too large for 32-bit column indices"));
        }
        let diag: Vec<f64> = basis
            .states()
            .iter()
            .map(|&s| diagonal_energy(s, bonds, delta))
            .collect();
        let estimate = dim.saturating_mul(1 + bonds.len().div_ceil(2));
        let storage = if estimate > nonzero_budget {
            Storage::OnTheFly {
                bonds: bonds.to_vec(),
                diag,
            }
        } else {
            let mut row_ptr = Vec::with_capacity(dim + 1);
            let mut cols = Vec::with_capacity(estimate);
            let mut vals = Vec::with_capacity(estimate);
            let mut row: Vec<(u32, f64)> = Vec::with_capacity(bonds.len() + 1);
            row_ptr.push(0);
            for (i, &s) in basis.states().iter().enumerate() {
                row.clear();
                if diag[i] != 0.0 {
                    row.push((i as u32, diag[i]));
                }
                for bond in bonds {
                    if let Some(t) = hop(s, bond) {
                        let j = basis.find(t);
                        debug_assert!(j.is_some(), "hop left the sector");
                        if let Some(j) = j {
                            row.push((j as u32, 2.0 * bond.strength));
                        }
                    }
                }
                row.sort_unstable_by_key(|e| e.0);
                // merge repeated columns (parallel bonds between the same pair)
                let start = cols.len();
                for &(c, v) in &row {
                    if cols.len() > start && *cols.last().unwrap() == c {
                        *vals.last_mut().unwrap() += v;
                    } else {
                        cols.push(c);
                        vals.push(v);
                    }
                }
                row_ptr.push(cols.len());
            }
            Storage::Csr {
                row_ptr,
                cols,
                vals,
            }
        };
        Ok(Self { basis, storage })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn shared_basis(&self) -> Arc<SectorBasis> {
        self.basis.clone()
    }

    pub fn is_materialized(&self) -> bool {
        matches!(self.storage, Storage::Csr { .. })
    }

    /// `y = H x`.
    pub fn apply_into<T: Amplitude>(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        match &self.storage {
            Storage::Csr {
                row_ptr,
                cols,
                vals,
            } => {
                for (i, yi) in y.iter_mut().enumerate() {
                    let mut acc = T::default();
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        acc += x[cols[k] as usize] * vals[k];
                    }
                    *yi = acc;
                }
            }
            Storage::OnTheFly { bonds, diag } => {
                for (i, (&s, yi)) in self.basis.states().iter().zip(y.iter_mut()).enumerate() {
                    let mut acc = x[i] * diag[i];
                    for bond in bonds {
                        if let Some(t) = hop(s, bond) {
                            let j = self.basis.find(t).expect("hop left the sector");
                            acc += x[j] * (2.0 * bond.strength);
                        }
                    }
                    *yi = acc;
                }
            }
        }
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.basis() != self.basis.as_ref() {
            return Err(Error::domain(format!(
                "state of dimension {} does not match operator of dimension {}",
                v.len(),
                self.dim()
            )));
        }
        let mut out = vec![C64::default(); self.dim()];
        self.apply_into(v.amplitudes(), &mut out);
        Ok(v.with_amplitudes(out))
    }

    /// `<v|H|v>`
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let mut hv = vec![C64::default(); self.dim()];
        self.apply_into(v, &mut hv);
        v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Csr {
                row_ptr,
                cols,
                vals,
            } => (0..self.dim())
                .map(|i| {
                    (row_ptr[i]..row_ptr[i + 1])
                        .find(|&k| cols[k] as usize == i)
                        .map_or(0.0, |k| vals[k])
                })
                .collect(),
            Storage::OnTheFly { diag, .. } => diag.clone(),
        }
    }

    /// Visits every stored entry `(row, col, value)`.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.storage {
            Storage::Csr {
                row_ptr,
                cols,
                vals,
            } => {
                for i in 0..self.dim() {
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        f(i, cols[k] as usize, vals[k]);
                    }
                }
            }
            Storage::OnTheFly { bonds, diag } => {
                for (i, &s) in self.basis.states().iter().enumerate() {
                    if diag[i] != 0.0 {
                        f(i, i, diag[i]);
                    }
                    for bond in bonds {
                        if let Some(t) = hop(s, bond) {
                            f(i, self.basis.find(t).unwrap(), 2.0 * bond.strength);
                        }
                    }
                }
            }
        }
    }

    pub fn nonzeros(&self) -> usize {
        match &self.storage {
            Storage::Csr { vals, .. } => vals.len(),
            Storage::OnTheFly { .. } => {
                let mut n = 0;
                self.for_each_entry(|_, _, _| n += 1);
                n
            }
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        match &self.storage {
            Storage::Csr {
                row_ptr,
                cols,
                vals,
            } => {
                let r = row_ptr[row]..row_ptr[row + 1];
                match cols[r.clone()].binary_search(&(col as u32)) {
                    Ok(k) => vals[r.start + k],
                    Err(_) => 0.0,
                }
            }
            Storage::OnTheFly { bonds, diag } => {
                if row == col {
                    return diag[row];
                }
                let s = self.basis.state(row);
                let t = self.basis.state(col);
                bonds
                    .iter()
                    .filter(|b| hop(s, b) == Some(t))
                    .map(|b| 2.0 * b.strength)
                    .sum()
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        self.for_each_entry(|i, j, v| m[(i, j)] += v);
        m
    }

    /// Upper bound on the spectral radius (largest absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        let mut rows = vec![0.0f64; self.dim()];
        self.for_each_entry(|i, _, v| rows[i] += v.abs());
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }
}

fn diagonal_energy(s: u64, bonds: &[Bond], delta: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    bonds
        .iter()
        .map(|b| {
            let same = (s >> b.a & 1) == (s >> b.b & 1);
            if same {
                delta * b.strength
            } else {
                -delta * b.strength
            }
        })
        .sum()
}

/// Configuration reached by the XY hop on `bond`, if the pair is antiparallel.
#[inline]
fn hop(s: u64, bond: &Bond) -> Option<u64> {
    if (s >> bond.a & 1) != (s >> bond.b & 1) && bond.strength != 0.0 {
        Some(s ^ (1 << bond.a | 1 << bond.b))
    } else {
        None
    }
}

/// Module Hamiltonian `H_k` in the given sector.
pub fn build_module_hamiltonian(spec: &ModuleSpec, basis: Arc<SectorBasis>) -> Result<SparseOperator> {
    build_module_hamiltonian_with(spec, None, basis)
}

/// Module Hamiltonian with per-bond factors in label order.
pub fn build_module_hamiltonian_with(
    spec: &ModuleSpec,
    factors: Option<&[f64]>,
    basis: Arc<SectorBasis>,
) -> Result<SparseOperator> {
    spec.validate()?;
    if basis.n_sites() != spec.n_sites {
        return Err(Error::domain(format!(
            "basis has {} sites, module has {}",
            basis.n_sites(),
            spec.n_sites
        )));
    }
    if let Some(f) = factors {
        if f.len() != spec.n_sites - 1 {
            return Err(Error::domain(format!(
                "{} bond factors for a module with {} bonds",
                f.len(),
                spec.n_sites - 1
            )));
        }
    }
    SparseOperator::from_bonds(basis, &spec.bonds(factors), spec.delta)
}

/// Post-quench Hamiltonian `H_T = H_L + H_R + H_I` on the joint chain.
pub fn build_total_hamiltonian(chain: &ChainSpec, basis: Arc<SectorBasis>) -> Result<SparseOperator> {
    chain.validate()?;
    if basis.n_sites() != chain.n_sites() {
        return Err(Error::domain(format!(
            "basis has {} sites, chain has {}",
            basis.n_sites(),
            chain.n_sites()
        )));
    }
    SparseOperator::from_bonds(basis, &chain.bonds(), chain.left.delta)
}

/// Pre-quench Hamiltonian `H_L + H_R` on the joint chain.
pub fn build_decoupled_hamiltonian(
    chain: &ChainSpec,
    basis: Arc<SectorBasis>,
) -> Result<SparseOperator> {
    build_total_hamiltonian(&chain.with_j_i(0.0), basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn module(n: usize, jp: f64, delta: f64) -> ModuleSpec {
        ModuleSpec::new(n, jp, delta)
    }

    #[test]
    fn xx_module_has_empty_diagonal() {
        let b = Arc::new(SectorBasis::new(6, 3).unwrap());
        let h = build_module_hamiltonian(&module(6, 0.4, 0.0), b).unwrap();
        assert!(h.diagonal().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn two_site_hop() {
        let b = Arc::new(SectorBasis::new(2, 1).unwrap());
        let bond = [Bond { a: 0, b: 1, strength: 1.5 }];
        let h = SparseOperator::from_bonds(b, &bond, 0.0).unwrap();
        assert_eq!(h.entry(0, 1), 3.0);
        assert_eq!(h.entry(1, 0), 3.0);
        assert_eq!(h.entry(0, 0), 0.0);
    }

    #[test]
    fn validation() {
        assert!(module(5, 0.5, 0.0).validate().is_err());
        assert!(module(2, 0.5, 0.0).validate().is_err());
        assert!(module(4, 0.0, 0.0).validate().is_err());
        assert!(module(4, 0.5, 1.5).validate().is_err());
        let mut m = module(4, 0.5, 1.5);
        m.allow_any_delta = true;
        assert!(m.validate().is_ok());

        let mut c = ChainSpec::symmetric(4, 0.5, 0.7, 0.0);
        c.right.delta = 1.0;
        assert!(c.validate().is_err());
        let mut c = ChainSpec::symmetric(4, 0.5, 0.7, 0.0);
        c.bond_factors = Some(vec![1.0; 6]);
        assert!(c.validate().is_err());
        c.bond_factors = Some(vec![1.0; 7]);
        assert!(c.validate().is_ok());
        let b = Arc::new(SectorBasis::new(6, 3).unwrap());
        assert!(build_total_hamiltonian(&ChainSpec::symmetric(4, 0.5, 0.7, 0.0), b).is_err());
    }

    #[test]
    fn right_factors_follow_mirror() {
        let mut c = ChainSpec::symmetric(4, 0.5, 0.7, 0.0);
        c.bond_factors = Some(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(c.left_factors().unwrap(), vec![1.0, 2.0, 3.0]);
        // right label bond 1-2 sits at linear sites 7-6, i.e. linear bond 6
        assert_eq!(c.right_factors().unwrap(), vec![7.0, 6.0, 5.0]);
        let bonds = c.bonds();
        let q = bonds.iter().find(|b| b.a == 3 && b.b == 4).unwrap();
        assert!((q.strength - 0.7 * 4.0).abs() < 1e-15);
        let end = bonds.iter().find(|b| b.a == 6 && b.b == 7).unwrap();
        assert!((end.strength - 0.5 * 7.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_free_matches_materialized() {
        let chain = ChainSpec::symmetric(4, 0.5, 0.75, 1.0);
        let b = Arc::new(SectorBasis::new(8, 4).unwrap());
        let csr = build_total_hamiltonian(&chain, b.clone()).unwrap();
        let lazy = SparseOperator::from_bonds_with_budget(b, &chain.bonds(), 1.0, 0).unwrap();
        assert!(csr.is_materialized());
        assert!(!lazy.is_materialized());
        assert_eq!(csr.to_dense(), lazy.to_dense());
        let x: Vec<C64> = (0..csr.dim()).map(|i| C64::new((i as f64).sin(), (i as f64).cos())).collect();
        let mut y1 = vec![C64::default(); csr.dim()];
        let mut y2 = y1.clone();
        csr.apply_into(&x, &mut y1);
        lazy.apply_into(&x, &mut y2);
        for (a, b) in y1.iter().zip(&y2) {
            assert!((a - b).norm() < 1e-13);
        }
        assert_eq!(csr.entry(3, 5), lazy.entry(3, 5));
    }

    #[test]
    fn unit_factors_change_nothing() {
        let mut chain = ChainSpec::symmetric(4, 0.5, 0.75, 1.0);
        let b = Arc::new(SectorBasis::new(8, 4).unwrap());
        let clean = build_total_hamiltonian(&chain, b.clone()).unwrap().to_dense();
        chain.bond_factors = Some(vec![1.0; 7]);
        let noisy = build_total_hamiltonian(&chain, b).unwrap().to_dense();
        assert_eq!(clean, noisy);
    }

    #[test]
    fn apply_rejects_wrong_basis() {
        let b = Arc::new(SectorBasis::new(4, 2).unwrap());
        let h = build_module_hamiltonian(&module(4, 1.0, 0.0), b).unwrap();
        let other = Arc::new(SectorBasis::new(4, 1).unwrap());
        let v = StateVector::basis_state(other, 1).unwrap();
        assert!(h.apply(&v).is_err());
    }
}
