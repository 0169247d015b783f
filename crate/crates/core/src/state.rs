use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::basis::SectorBasis;
use crate::error::{Error, Result};

/// Complex amplitudes over a [`SectorBasis`].
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<SectorBasis>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(basis: Arc<SectorBasis>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.len() {
            return Err(Error::domain(format!(
                "{} amplitudes for a basis of {} states",
                amps.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, amps })
    }

    pub fn from_real(basis: Arc<SectorBasis>, amps: &[f64]) -> Result<Self> {
        Self::new(basis, amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn basis_state(basis: Arc<SectorBasis>, config: u64) -> Result<Self> {
        let idx = basis.index_of(config)?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.len()];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self { basis, amps })
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn shared_basis(&self) -> Arc<SectorBasis> {
        self.basis.clone()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::domain("cannot normalize a zero or non-finite state"));
        }
        self.amps.iter_mut().for_each(|a| *a /= n);
        Ok(())
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.basis != other.basis {
            return Err(Error::domain("inner product across different bases"));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub(crate) fn with_amplitudes(&self, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), self.amps.len());
        Self {
            basis: self.basis.clone(),
            amps,
        }
    }
}

/// Dense density matrix over a sector basis.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    basis: Arc<SectorBasis>,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    pub fn new(basis: Arc<SectorBasis>, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::domain(format!(
                "{}x{} density matrix for a basis of {} states",
                matrix.nrows(),
                matrix.ncols(),
                basis.len()
            )));
        }
        Ok(Self { basis, matrix })
    }

    pub fn pure(state: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Self {
            basis: state.shared_basis(),
            matrix: &v * v.adjoint(),
        }
    }

    /// Identity divided by the sector dimension.
    pub fn maximally_mixed(basis: Arc<SectorBasis>) -> Self {
        let d = basis.len();
        let matrix = DMatrix::from_diagonal_element(d, d, C64::new(1.0 / d as f64, 0.0));
        Self { basis, matrix }
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn shared_basis(&self) -> Arc<SectorBasis> {
        self.basis.clone()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Largest `|rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.matrix.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}
