//! Ground states, low-lying spectra and full sector spectra.
//!
//! Small sectors go through a dense symmetric eigensolver. Larger ones use
//! Lanczos with full reorthogonalization and explicit restarts.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::SectorBasis;
use crate::error::{Error, Result};
use crate::hamiltonian::{build_module_hamiltonian, ModuleSpec, SparseOperator};
use crate::state::StateVector;

/// Gaps below this count as a degenerate ground state.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct EigenOptions {
    /// Sectors up to this dimension are diagonalized densely.
    pub dense_threshold: usize,
    /// Largest dimension `full_spectrum` will accept.
    pub dense_cap: usize,
    /// Lanczos subspace size before a restart.
    pub max_krylov: usize,
    pub max_restarts: usize,
    /// Relative residual target for Ritz pairs.
    pub tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 2000,
            dense_cap: 6000,
            max_krylov: 300,
            max_restarts: 30,
            tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub energy: f64,
    pub vector: StateVector,
}

/// Full eigendecomposition of a real symmetric sector operator, energies
/// ascending, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub basis: Arc<SectorBasis>,
    pub energies: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn pair(&self, n: usize) -> EigenPair {
        let amps = self.vectors.column(n).iter().map(|&x| C64::new(x, 0.0)).collect();
        EigenPair {
            energy: self.energies[n],
            vector: StateVector::new(self.basis.clone(), amps).expect("dimension checked"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapResult {
    pub e0: f64,
    pub e1: f64,
    /// `e1 - e0` across the scanned sectors.
    pub delta: f64,
    /// Sector holding the ground state.
    pub ground_sector: usize,
    /// Sector holding `e1`.
    pub sector_of_gap: usize,
    /// First excitation inside the ground sector only.
    pub sector_gap: f64,
    pub degenerate: bool,
}

/// Dense eigendecomposition, energies ascending.
pub fn dense_spectrum(op: &SparseOperator, cap: usize) -> Result<Spectrum> {
    if op.dim() > cap {
        return Err(Error::Capacity {
            dim: op.dim(),
            cap,
        });
    }
    let (energies, vectors) = sorted_eigh(op.to_dense());
    Ok(Spectrum {
        basis: op.shared_basis(),
        energies,
        vectors,
    })
}

/// Symmetric eigendecomposition with ascending eigenvalues.
pub(crate) fn sorted_eigh(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = a
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigensolver converges on finite input");
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s[x].total_cmp(&s[y]));
    let energies = order.iter().map(|&i| s[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    (energies, vectors)
}

pub fn full_spectrum(op: &SparseOperator, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    let spec = dense_spectrum(op, opts.dense_cap)?;
    Ok((0..spec.dim()).map(|n| spec.pair(n)).collect())
}

pub fn ground_state(op: &SparseOperator, opts: &EigenOptions) -> Result<EigenPair> {
    Ok(lowest_k(op, 1, opts)?.remove(0))
}

/// The `k` lowest eigenpairs, energies nondecreasing.
pub fn lowest_k(op: &SparseOperator, k: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::domain(format!("requested {k} eigenpairs of a {dim}-dimensional operator")));
    }
    let pairs: Vec<(f64, Vec<f64>)> = if dim <= opts.dense_threshold {
        let (e, v) = sorted_eigh(op.to_dense());
        (0..k).map(|n| (e[n], v.column(n).iter().copied().collect())).collect()
    } else {
        lanczos_lowest(op, k, opts)?
    };
    let basis = op.shared_basis();
    let mut out = Vec::with_capacity(k);
    let mut hv = vec![0.0; dim];
    for (energy, mut v) in pairs {
        fix_phase(&mut v);
        op.apply_into(&v, &mut hv);
        let residual = hv
            .iter()
            .zip(&v)
            .map(|(h, x)| (h - energy * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual > 1e-8 * energy.abs().max(1.0) {
            return Err(Error::Convergence {
                iterations: 0,
                residual,
            });
        }
        out.push(EigenPair {
            energy,
            vector: StateVector::from_real(basis.clone(), &v)?,
        });
    }
    Ok(out)
}

/// Makes the largest-magnitude amplitude positive.
fn fix_phase(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Orthogonalizes `w` against `basis` twice (classical Gram-Schmidt, repeated).
fn reorthogonalize(basis: &[Vec<f64>], w: &mut [f64]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

fn lanczos_lowest(op: &SparseOperator, k: usize, opts: &EigenOptions) -> Result<Vec<(f64, Vec<f64>)>> {
    let dim = op.dim();
    let m_max = opts.max_krylov.max(k + 10).min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a9c);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    normalize(&mut start);
    let mut last_residual = f64::INFINITY;
    let mut iterations = 0;

    for _restart in 0..=opts.max_restarts {
        let mut q: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];
        let mut ritz: Option<(Vec<f64>, DMatrix<f64>)> = None;

        for j in 0..m_max {
            iterations += 1;
            op.apply_into(&q[j], &mut w);
            let a = dot(&q[j], &w);
            alpha.push(a);
            reorthogonalize(&q, &mut w);
            let mut b = normalize(&mut w);
            let m = j + 1;
            let check = m >= k && (m % 5 == 0 || m == m_max || b < 1e-12);
            if check {
                let t = tridiagonal(&alpha, &beta);
                let (theta, s) = sorted_eigh(t);
                let converged = (0..k).all(|i| {
                    (b * s[(m - 1, i)]).abs() <= opts.tol * theta[i].abs().max(1.0)
                });
                if converged || m == m_max || (b < 1e-12 && m == dim) {
                    ritz = Some((theta, s));
                    break;
                }
            }
            if b < 1e-12 {
                // invariant subspace found early; continue with a fresh direction
                let mut fresh: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
                reorthogonalize(&q, &mut fresh);
                normalize(&mut fresh);
                w.copy_from_slice(&fresh);
                b = 0.0;
            }
            beta.push(b);
            q.push(w.clone());
        }

        let (theta, s) = ritz.expect("loop always ends with a Ritz check");
        let m = theta.len();
        let mut pairs = Vec::with_capacity(k);
        for i in 0..k {
            let mut v = vec![0.0; dim];
            for (jj, qj) in q.iter().take(m).enumerate() {
                axpy(s[(jj, i)], qj, &mut v);
            }
            normalize(&mut v);
            pairs.push((theta[i], v));
        }
        // true residuals decide, the Lanczos estimate only steers the loop
        let mut hv = vec![0.0; dim];
        let mut worst: f64 = 0.0;
        for (e, v) in &pairs {
            op.apply_into(v, &mut hv);
            axpy(-e, v, &mut hv);
            worst = worst.max(dot(&hv, &hv).sqrt() / e.abs().max(1.0));
        }
        last_residual = worst;
        if worst <= 1e-9 {
            // Rayleigh quotients of the normalized Ritz vectors
            for (e, v) in pairs.iter_mut() {
                op.apply_into(v, &mut hv);
                *e = dot(v, &hv);
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            return Ok(pairs);
        }
        start = vec![0.0; dim];
        for (_, v) in &pairs {
            axpy(1.0, v, &mut start);
        }
        normalize(&mut start);
    }
    Err(Error::Convergence {
        iterations,
        residual: last_residual,
    })
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Energy gap of a module across the sectors `N/2, N/2 +- 1, N/2 +- 2`.
pub fn energy_gap(spec: &ModuleSpec, opts: &EigenOptions) -> Result<GapResult> {
    spec.validate()?;
    let n = spec.n_sites;
    let half = n / 2;
    let mut levels: Vec<(f64, usize)> = Vec::new();
    let mut sector_pairs: Vec<(usize, Vec<f64>)> = Vec::new();
    for n_up in half.saturating_sub(2)..=(half + 2).min(n) {
        let basis = Arc::new(SectorBasis::new(n, n_up)?);
        let h = build_module_hamiltonian(spec, basis)?;
        let k = h.dim().min(2);
        let energies: Vec<f64> = lowest_k(&h, k, opts)?.iter().map(|p| p.energy).collect();
        levels.extend(energies.iter().map(|&e| (e, n_up)));
        sector_pairs.push((n_up, energies));
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (e0, ground_sector) = levels[0];
    let (e1, sector_of_gap) = levels[1];
    let in_sector = &sector_pairs
        .iter()
        .find(|(s, _)| *s == ground_sector)
        .expect("ground sector scanned")
        .1;
    let sector_gap = if in_sector.len() > 1 {
        in_sector[1] - in_sector[0]
    } else {
        f64::NAN
    };
    let delta = e1 - e0;
    Ok(GapResult {
        e0,
        e1,
        delta,
        ground_sector,
        sector_of_gap,
        sector_gap,
        degenerate: delta < DEGENERACY_TOL,
    })
}

/// Lowest state of `op` as a dense column, mostly for tests and oracles.
pub fn ground_vector(op: &SparseOperator, opts: &EigenOptions) -> Result<(f64, DVector<f64>)> {
    let gs = ground_state(op, opts)?;
    let v = DVector::from_iterator(gs.vector.len(), gs.vector.amplitudes().iter().map(|a| a.re));
    Ok((gs.energy, v))
}
