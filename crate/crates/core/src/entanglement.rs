//! Two-site reduced states, Bell-basis weights, and the entanglement
//! measures built on them.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::SectorBasis;
use crate::error::{Error, Result};
use crate::state::{DensityOperator, StateVector};

/// Two-qubit density matrix over `{00, 01, 10, 11}`; the first bit is the
/// first site of the pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitDensity(pub Matrix4<C64>);

impl TwoQubitDensity {
    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Bell-diagonal state with weights `(p_s, p_x, p_y, p_z)`.
    pub fn bell_diagonal(weights: [f64; 4]) -> Self {
        let b = bell_basis();
        let mut m = Matrix4::zeros();
        for (k, w) in weights.iter().enumerate() {
            let v = b.column(k);
            m += v * v.adjoint() * C64::new(*w, 0.0);
        }
        Self(m)
    }

    pub fn singlet() -> Self {
        Self::bell_diagonal([1.0, 0.0, 0.0, 0.0])
    }

    pub fn maximally_mixed() -> Self {
        Self(Matrix4::identity() * C64::new(0.25, 0.0))
    }
}

/// Columns: `|psi->`, `X|psi->`, `Y|psi->`, `Z|psi->` (Pauli on the first qubit).
pub fn bell_basis() -> Matrix4<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x * s, 0.0);
    let i = |x: f64| C64::new(0.0, x * s);
    let z = C64::new(0.0, 0.0);
    #[rustfmt::skip]
    let m = Matrix4::new(
        z,      r(-1.0), i(1.0), z,
        r(1.0), z,       z,      r(1.0),
        r(-1.0), z,      z,      r(1.0),
        z,      r(1.0),  i(1.0), z,
    );
    m
}

/// Weights of a two-qubit state in the Bell basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellMix {
    pub p_s: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    /// Largest off-diagonal element in the Bell basis.
    pub residual: f64,
}

impl BellMix {
    pub fn weights(&self) -> [f64; 4] {
        [self.p_s, self.p_x, self.p_y, self.p_z]
    }

    pub fn p_max(&self) -> f64 {
        self.weights().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementValue {
    /// Relative entropy of entanglement, `1 - H(p_max)` above one half.
    pub e: f64,
    pub c: f64,
}

/// Binary entropy in bits, `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    term(x) + term(1.0 - x)
}

/// Clamped relative entropy of entanglement for a largest Bell weight `p_max`.
pub fn entanglement_from_pmax(p_max: f64) -> f64 {
    if p_max > 0.5 {
        (1.0 - binary_entropy(p_max)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn bell_decompose(rho: &TwoQubitDensity) -> BellMix {
    let b = bell_basis();
    let m = b.adjoint() * rho.0 * b;
    let clamp = |x: f64| if x < 0.0 && x > -1e-10 { 0.0 } else { x };
    let mut residual: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                residual = residual.max(m[(i, j)].norm());
            }
        }
    }
    BellMix {
        p_s: clamp(m[(0, 0)].re),
        p_x: clamp(m[(1, 1)].re),
        p_y: clamp(m[(2, 2)].re),
        p_z: clamp(m[(3, 3)].re),
        residual,
    }
}

pub fn entanglement_e(mix: &BellMix) -> EntanglementValue {
    let p = mix.p_max().max(0.0);
    EntanglementValue {
        e: entanglement_from_pmax(p),
        c: (2.0 * p - 1.0).max(0.0),
    }
}

/// Wootters concurrence from `sqrt(rho) (Y⊗Y) rho* (Y⊗Y) sqrt(rho)`.
pub fn concurrence(rho: &TwoQubitDensity) -> f64 {
    let h = (rho.0 + rho.0.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let sqrt_diag = Matrix4::from_diagonal(&eig.eigenvalues.map(|x| C64::new(x.max(0.0).sqrt(), 0.0)));
    let sqrt_rho = eig.eigenvectors * sqrt_diag * eig.eigenvectors.adjoint();
    // Y⊗Y in the computational basis
    let yy = Matrix4::new(
        0.0, 0.0, 0.0, -1.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0,
    )
    .map(|x| C64::new(x, 0.0));
    let flipped = yy * h.map(|z| z.conj()) * yy;
    let m = sqrt_rho * flipped * sqrt_rho;
    let m = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut l: Vec<f64> = SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|x| x.max(0.0).sqrt())
        .collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

/// Index bookkeeping for tracing a sector state down to two sites.
#[derive(Debug, Clone)]
pub struct PairReducer {
    site_a: usize,
    site_b: usize,
    dim: usize,
    /// Two-qubit class `2*bit_a + bit_b` of each basis state.
    class: Vec<u8>,
    /// Basis pairs differing only at the two sites, lower class first.
    partners: Vec<(u32, u32)>,
}

impl PairReducer {
    pub fn new(basis: &SectorBasis, site_a: usize, site_b: usize) -> Result<Self> {
        let n = basis.n_sites();
        if site_a >= n || site_b >= n || site_a == site_b {
            return Err(Error::domain(format!(
                "sites ({site_a}, {site_b}) must be distinct and below {n}"
            )));
        }
        let mask = 1u64 << site_a | 1u64 << site_b;
        let class_of = |s: u64| ((s >> site_a & 1) * 2 + (s >> site_b & 1)) as u8;
        let class: Vec<u8> = basis.states().iter().map(|&s| class_of(s)).collect();
        let mut partners = Vec::new();
        for (i, &s) in basis.states().iter().enumerate() {
            let rest = s & !mask;
            for c in (class[i] + 1)..4 {
                let t = rest | (c as u64 >> 1) << site_a | (c as u64 & 1) << site_b;
                if let Some(j) = basis.find(t) {
                    partners.push((i as u32, j as u32));
                }
            }
        }
        Ok(Self {
            site_a,
            site_b,
            dim: basis.len(),
            class,
            partners,
        })
    }

    pub fn sites(&self) -> (usize, usize) {
        (self.site_a, self.site_b)
    }

    /// Unnormalized reduced matrix of the pure state `amps`.
    pub fn reduce_amplitudes(&self, amps: &[C64]) -> Matrix4<C64> {
        assert_eq!(amps.len(), self.dim);
        let mut diag = [0.0f64; 4];
        for (a, &c) in amps.iter().zip(&self.class) {
            diag[c as usize] += a.norm_sqr();
        }
        let mut m = Matrix4::from_diagonal(&nalgebra::Vector4::from_iterator(
            diag.iter().map(|&d| C64::new(d, 0.0)),
        ));
        for &(i, j) in &self.partners {
            let (i, j) = (i as usize, j as usize);
            let v = amps[i] * amps[j].conj();
            let (ci, cj) = (self.class[i] as usize, self.class[j] as usize);
            m[(ci, cj)] += v;
            m[(cj, ci)] += v.conj();
        }
        m
    }

    /// Reduced matrix of a density operator on the same sector.
    pub fn reduce_density(&self, rho: &nalgebra::DMatrix<C64>) -> Matrix4<C64> {
        assert_eq!(rho.nrows(), self.dim);
        let mut m = Matrix4::zeros();
        for (i, &c) in self.class.iter().enumerate() {
            m[(c as usize, c as usize)] += rho[(i, i)];
        }
        for &(i, j) in &self.partners {
            let (i, j) = (i as usize, j as usize);
            let (ci, cj) = (self.class[i] as usize, self.class[j] as usize);
            m[(ci, cj)] += rho[(i, j)];
            m[(cj, ci)] += rho[(j, i)];
        }
        m
    }

    pub fn partners(&self) -> &[(u32, u32)] {
        &self.partners
    }

    pub fn classes(&self) -> &[u8] {
        &self.class
    }
}

/// Partial trace of a normalized pure state down to two sites.
pub fn reduced_two_qubit(state: &StateVector, site_a: usize, site_b: usize) -> Result<TwoQubitDensity> {
    let r = PairReducer::new(state.basis(), site_a, site_b)?;
    let n2 = state.norm().powi(2);
    Ok(TwoQubitDensity(r.reduce_amplitudes(state.amplitudes()) / C64::new(n2, 0.0)))
}

/// Partial trace of a sector density operator down to two sites.
pub fn reduced_two_qubit_density(rho: &DensityOperator, site_a: usize, site_b: usize) -> Result<TwoQubitDensity> {
    let r = PairReducer::new(rho.basis(), site_a, site_b)?;
    Ok(TwoQubitDensity(r.reduce_density(rho.matrix())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn bell_basis_is_unitary() {
        let b = bell_basis();
        let id = b.adjoint() * b;
        assert!((id - Matrix4::identity()).camax() < 1e-15);
    }

    #[test]
    fn bell_weights_of_reference_states() {
        let m = bell_decompose(&TwoQubitDensity::singlet());
        assert!((m.p_s - 1.0).abs() < 1e-15 && m.residual < 1e-15);
        let m = bell_decompose(&TwoQubitDensity::maximally_mixed());
        for w in m.weights() {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert!(m.residual < 1e-15);
    }

    #[test]
    fn entanglement_values() {
        let e = |p: [f64; 4]| entanglement_e(&bell_decompose(&TwoQubitDensity::bell_diagonal(p)));
        let v = e([1.0, 0.0, 0.0, 0.0]);
        assert!((v.e - 1.0).abs() < 1e-12 && (v.c - 1.0).abs() < 1e-12);
        let v = e([0.5, 0.5, 0.0, 0.0]);
        assert_eq!(v.e, 0.0);
        assert!(v.c < 1e-15);
        // 1 - H(5/8), evaluated by hand: H(0.625) = 0.954434002924965
        let v = e([0.625, 0.125, 0.125, 0.125]);
        assert!((v.e - 0.045565997075035).abs() < 1e-12);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
    }

    #[test]
    fn wootters_reference_values() {
        assert!((concurrence(&TwoQubitDensity::singlet()) - 1.0).abs() < 1e-9);
        assert!(concurrence(&TwoQubitDensity::maximally_mixed()).abs() < 1e-9);
        let rho = TwoQubitDensity::bell_diagonal([0.7, 0.1, 0.1, 0.1]);
        assert!((concurrence(&rho) - 0.4).abs() < 1e-9);
        let rho = TwoQubitDensity::bell_diagonal([0.1, 0.1, 0.05, 0.75]);
        assert!((concurrence(&rho) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn product_state_reduces_to_projector() {
        let b = Arc::new(SectorBasis::new(6, 3).unwrap());
        let v = StateVector::basis_state(b, 0b101010).unwrap();
        let r = reduced_two_qubit(&v, 0, 1).unwrap();
        // site 0 down, site 1 up: class 01
        assert!((r.0[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!((r.0.map(|z| z.norm()).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_site_singlet() {
        let b = Arc::new(SectorBasis::new(2, 1).unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // index 0 = config 01 (site 0 up) -> class 10 for pair (0,1)
        let v = StateVector::from_real(b, &[-s, s]).unwrap();
        let r = reduced_two_qubit(&v, 0, 1).unwrap();
        assert!((r.0 - TwoQubitDensity::singlet().0).camax() < 1e-15);
    }

    #[test]
    fn rejects_bad_sites() {
        let b = Arc::new(SectorBasis::new(4, 2).unwrap());
        let v = StateVector::basis_state(b, 0b0011).unwrap();
        assert!(reduced_two_qubit(&v, 1, 1).is_err());
        assert!(reduced_two_qubit(&v, 0, 4).is_err());
    }
}
