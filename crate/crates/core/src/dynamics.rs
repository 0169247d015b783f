//! Unitary time evolution `exp(-iHt)` of pure states and density matrices.
//!
//! The Krylov propagator builds a Lanczos basis of the current state, picks
//! the longest sub-step whose a posteriori error estimate fits the budget,
//! and reads off every requested sample inside that sub-step from the same
//! basis. Times are in units of hbar/J.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{dense_spectrum, sorted_eigh, Spectrum};
use crate::error::{Error, Result};
use crate::hamiltonian::SparseOperator;
use crate::state::{DensityOperator, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovOptions {
    /// Error budget for a whole propagation (2-norm of the state).
    pub tol: f64,
    /// Initial Krylov subspace size.
    pub m_start: usize,
    /// Upper limit on the subspace size.
    pub m_max: usize,
    pub max_steps: usize,
    /// Reorthogonalize every Lanczos vector against the whole basis. When
    /// off, a step that loses norm is redone with reorthogonalization.
    pub full_reorth: bool,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            m_start: 20,
            m_max: 60,
            max_steps: 1_000_000,
            full_reorth: false,
        }
    }
}

/// Bookkeeping from one or more propagations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KrylovStats {
    pub steps: usize,
    pub matvecs: usize,
    pub max_subspace: usize,
    pub min_step: f64,
    pub max_step: f64,
    pub reorth_fallbacks: usize,
}

impl KrylovStats {
    fn record(&mut self, m: usize, tau: f64) {
        if self.steps == 0 {
            self.min_step = tau;
            self.max_step = tau;
        } else {
            self.min_step = self.min_step.min(tau);
            self.max_step = self.max_step.max(tau);
        }
        self.steps += 1;
        self.max_subspace = self.max_subspace.max(m);
    }
}

/// Safety factor applied to the Lanczos error estimate.
const ESTIMATE_SAFETY: f64 = 10.0;

struct Lanczos {
    vectors: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Hit an invariant subspace: the projection is exact.
    exact: bool,
}

impl Lanczos {
    fn new(start: &[C64]) -> (Self, f64) {
        let norm = norm(start);
        let v0 = start.iter().map(|a| a / norm).collect();
        (
            Self {
                vectors: vec![v0],
                alpha: Vec::new(),
                beta: Vec::new(),
                exact: false,
            },
            norm,
        )
    }

    fn m(&self) -> usize {
        self.alpha.len()
    }

    fn extend_to(&mut self, op: &SparseOperator, m: usize, full: bool, work: &mut [C64]) -> usize {
        let mut matvecs = 0;
        while self.m() < m && !self.exact {
            let j = self.m();
            op.apply_into(&self.vectors[j], work);
            matvecs += 1;
            let a = dotc(&self.vectors[j], work).re;
            axpy(C64::new(-a, 0.0), &self.vectors[j], work);
            if j > 0 {
                axpy(C64::new(-self.beta[j - 1], 0.0), &self.vectors[j - 1], work);
            }
            if full {
                for _ in 0..2 {
                    for q in &self.vectors {
                        let c = dotc(q, work);
                        axpy(-c, q, work);
                    }
                }
            }
            let b = norm(work);
            self.alpha.push(a);
            self.beta.push(b);
            let scale = self.alpha.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
            if b <= 1e-13 * scale {
                self.exact = true;
                break;
            }
            self.vectors.push(work.iter().map(|w| w / b).collect());
        }
        matvecs
    }

    fn projected(&self) -> Projected {
        let m = self.m();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = self.alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        let (theta, s) = sorted_eigh(t);
        Projected {
            first: (0..m).map(|k| s[(0, k)]).collect(),
            theta,
            s,
            residual: if self.exact { 0.0 } else { self.beta[m - 1] },
        }
    }
}

/// Eigendecomposition of the tridiagonal projection.
struct Projected {
    theta: Vec<f64>,
    s: DMatrix<f64>,
    first: Vec<f64>,
    residual: f64,
}

impl Projected {
    /// `exp(-i T tau) e_1` in the Lanczos basis.
    fn coefficients(&self, tau: f64) -> Vec<C64> {
        let m = self.theta.len();
        let phased: Vec<C64> = (0..m)
            .map(|k| C64::from_polar(self.first[k], -self.theta[k] * tau))
            .collect();
        (0..m)
            .map(|j| (0..m).map(|k| phased[k] * self.s[(j, k)]).sum())
            .collect()
    }

    fn error_estimate(&self, tau: f64) -> f64 {
        if self.residual == 0.0 {
            return 0.0;
        }
        let m = self.theta.len();
        let last: C64 = (0..m)
            .map(|k| C64::from_polar(self.first[k] * self.s[(m - 1, k)], -self.theta[k] * tau))
            .sum();
        ESTIMATE_SAFETY * self.residual * last.norm()
    }

    /// Longest step up to `limit` whose error fits `rate * step`.
    fn admissible_step(&self, limit: f64, rate: f64, guess: f64) -> f64 {
        let ok = |tau: f64| self.error_estimate(tau) <= rate * tau;
        if ok(limit) {
            return limit;
        }
        let mut lo = 0.0;
        let mut hi = limit;
        let mut tau = guess.min(limit);
        // bracket
        if ok(tau) {
            lo = tau;
            while tau < limit {
                tau = (tau * 2.0).min(limit);
                if ok(tau) {
                    lo = tau;
                } else {
                    hi = tau;
                    break;
                }
            }
        } else {
            hi = tau;
            while tau > limit * 1e-14 {
                tau *= 0.5;
                if ok(tau) {
                    lo = tau;
                    break;
                }
                hi = tau;
            }
        }
        if lo == 0.0 {
            return 0.0;
        }
        for _ in 0..20 {
            if hi - lo <= 1e-3 * lo {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// Adaptive Krylov propagator bound to one Hamiltonian.
pub struct KrylovPropagator<'a> {
    op: &'a SparseOperator,
    opts: KrylovOptions,
    stats: KrylovStats,
    work: Vec<C64>,
    last_step: f64,
    last_m: usize,
}

impl<'a> KrylovPropagator<'a> {
    pub fn new(op: &'a SparseOperator, opts: KrylovOptions) -> Self {
        Self {
            op,
            opts,
            stats: KrylovStats::default(),
            work: vec![C64::default(); op.dim()],
            last_step: 0.0,
            last_m: opts.m_start.max(2),
        }
    }

    pub fn stats(&self) -> KrylovStats {
        self.stats
    }

    pub fn evolve(&mut self, v: &[C64], t: f64) -> Result<Vec<C64>> {
        self.trajectory(v, &[t], |_, _| Ok(()))
    }

    /// Evolves `v` through the sample times (measured from `v` at t = 0),
    /// handing each sampled state to `visit`. Times must be monotone and
    /// of one sign. Returns the state at the last time.
    pub fn trajectory<F>(&mut self, v: &[C64], times: &[f64], mut visit: F) -> Result<Vec<C64>>
    where
        F: FnMut(usize, &[C64]) -> Result<()>,
    {
        self.trajectory_while(v, times, |i, s| visit(i, s).map(|_| true))
    }

    /// Like [`trajectory`](Self::trajectory), but stops as soon as `visit`
    /// returns `false` and returns the state it was last handed.
    pub fn trajectory_while<F>(&mut self, v: &[C64], times: &[f64], mut visit: F) -> Result<Vec<C64>>
    where
        F: FnMut(usize, &[C64]) -> Result<bool>,
    {
        let dim = self.op.dim();
        if v.len() != dim {
            return Err(Error::domain(format!(
                "state of dimension {} for an operator of dimension {dim}",
                v.len()
            )));
        }
        let Some(&t_end) = times.last() else {
            return Ok(v.to_vec());
        };
        let dir = if t_end < 0.0 { -1.0 } else { 1.0 };
        if times.iter().any(|t| !t.is_finite() || t * dir < 0.0)
            || times.windows(2).any(|w| (w[1] - w[0]) * dir < 0.0)
        {
            return Err(Error::domain("sample times must be finite, monotone and of one sign"));
        }
        let total = t_end.abs();
        let rate = if total > 0.0 { self.opts.tol / total } else { 0.0 };
        let m_max = self.opts.m_max.max(2).min(dim);
        let m_start = self.opts.m_start.max(2).min(m_max);
        self.last_m = self.last_m.clamp(m_start, m_max);

        let mut cur = v.to_vec();
        let mut elapsed = 0.0f64;
        let mut next = 0;
        let mut steps = 0;
        loop {
            while next < times.len() && times[next].abs() <= elapsed {
                if !visit(next, &cur)? {
                    return Ok(cur);
                }
                next += 1;
            }
            if next == times.len() {
                break;
            }
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(Error::Accuracy {
                    tol: self.opts.tol,
                    reason: format!("more than {} sub-steps", self.opts.max_steps),
                });
            }
            let remaining = total - elapsed;
            let mut full = self.opts.full_reorth;
            let (step, m, new_state) = loop {
                let (step, m, lanczos, proj, norm0) = self.plan_step(&cur, remaining, rate, m_start, m_max, full)?;
                // samples strictly inside this step, plus its end if it is a sample
                let end = if step >= remaining { total } else { elapsed + step };
                let first = next;
                let mut last = next;
                while last < times.len() && times[last].abs() <= end {
                    last += 1;
                }
                let mut offsets: Vec<f64> = times[first..last]
                    .iter()
                    .map(|t| (t.abs() - elapsed) * dir)
                    .collect();
                offsets.push(step * dir);
                let states = combine(&lanczos.vectors, &proj, &offsets, norm0, dim);
                let drift = (norm(states.last().unwrap()) - norm0).abs();
                if !full && drift > 1e-11 * norm0.max(1.0) {
                    self.stats.reorth_fallbacks += 1;
                    full = true;
                    continue;
                }
                for (k, s) in states[..states.len() - 1].iter().enumerate() {
                    if !visit(first + k, s)? {
                        return Ok(s.clone());
                    }
                }
                next = last;
                break (step, m, states.into_iter().last().unwrap());
            };
            self.stats.record(m, step);
            self.last_step = step;
            self.last_m = m;
            cur = new_state;
            elapsed = if step >= remaining { total } else { elapsed + step };
        }
        Ok(cur)
    }

    /// Builds a Krylov basis, growing it while that lengthens the step per
    /// matrix-vector product.
    #[allow(clippy::type_complexity)]
    fn plan_step(
        &mut self,
        cur: &[C64],
        remaining: f64,
        rate: f64,
        m_start: usize,
        m_max: usize,
        full: bool,
    ) -> Result<(f64, usize, Lanczos, Projected, f64)> {
        let (mut lanczos, norm0) = Lanczos::new(cur);
        if norm0 == 0.0 {
            return Err(Error::domain("cannot propagate the zero vector"));
        }
        let mut m = self.last_m.clamp(m_start, m_max);
        self.stats.matvecs += lanczos.extend_to(self.op, m, full, &mut self.work);
        let guess = if self.last_step > 0.0 {
            self.last_step
        } else {
            let h = self.op.norm_bound().max(1e-12);
            (m as f64 / h).min(remaining)
        };
        let mut proj = lanczos.projected();
        let mut step = proj.admissible_step(remaining, rate, guess);
        while step < remaining && lanczos.m() < m_max && !lanczos.exact {
            let grown = (lanczos.m() + 10).min(m_max);
            let mut trial = Lanczos {
                vectors: lanczos.vectors.clone(),
                alpha: lanczos.alpha.clone(),
                beta: lanczos.beta.clone(),
                exact: false,
            };
            self.stats.matvecs += trial.extend_to(self.op, grown, full, &mut self.work);
            let trial_proj = trial.projected();
            let trial_step = trial_proj.admissible_step(remaining, rate, step.max(guess));
            let better = trial_step / trial.m() as f64 > step / lanczos.m() as f64;
            if better || step == 0.0 {
                lanczos = trial;
                proj = trial_proj;
                step = trial_step;
                m = lanczos.m();
            } else {
                break;
            }
        }
        if lanczos.exact {
            step = remaining;
            m = lanczos.m();
        }
        if step <= 0.0 {
            return Err(Error::Accuracy {
                tol: self.opts.tol,
                reason: format!("no admissible step with a {m}-dimensional Krylov space"),
            });
        }
        Ok((step, m.max(lanczos.m()), lanczos, proj, norm0))
    }
}

/// States `norm0 * V y(offset)` for each offset, reading `V` once.
fn combine(vectors: &[Vec<C64>], proj: &Projected, offsets: &[f64], norm0: f64, dim: usize) -> Vec<Vec<C64>> {
    let m = proj.theta.len();
    let coeffs: Vec<Vec<C64>> = offsets
        .iter()
        .map(|&s| proj.coefficients(s).into_iter().map(|c| c * norm0).collect())
        .collect();
    let mut out = vec![vec![C64::default(); dim]; offsets.len()];
    for (j, vj) in vectors.iter().take(m).enumerate() {
        for (o, c) in out.iter_mut().zip(&coeffs) {
            axpy(c[j], vj, o);
        }
    }
    out
}

#[inline]
fn dotc(a: &[C64], b: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

#[inline]
fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(-i H t) v` with the adaptive Krylov propagator.
pub fn evolve_krylov(op: &SparseOperator, v: &StateVector, t: f64, tol: f64) -> Result<StateVector> {
    check_basis(op, v)?;
    let opts = KrylovOptions {
        tol,
        ..Default::default()
    };
    let out = KrylovPropagator::new(op, opts).evolve(v.amplitudes(), t)?;
    Ok(v.with_amplitudes(out))
}

fn check_basis(op: &SparseOperator, v: &StateVector) -> Result<()> {
    if v.basis() != op.basis() {
        return Err(Error::domain("state and operator live on different bases"));
    }
    Ok(())
}

/// Exact propagation in a precomputed eigenbasis.
#[derive(Debug, Clone)]
pub struct DenseEvolver {
    spectrum: Spectrum,
}

impl DenseEvolver {
    pub fn new(op: &SparseOperator, cap: usize) -> Result<Self> {
        Ok(Self {
            spectrum: dense_spectrum(op, cap)?,
        })
    }

    pub fn from_spectrum(spectrum: Spectrum) -> Self {
        Self { spectrum }
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Overlaps `<E_n|v>`.
    pub fn coefficients(&self, v: &[C64]) -> Vec<C64> {
        let vecs = &self.spectrum.vectors;
        (0..self.spectrum.dim())
            .map(|n| vecs.column(n).iter().zip(v).map(|(e, a)| a * *e).sum())
            .collect()
    }

    /// State at time `t` from eigenbasis coefficients.
    pub fn state_at(&self, coeffs: &[C64], t: f64) -> Vec<C64> {
        let d = self.spectrum.dim();
        let mut out = vec![C64::default(); d];
        for (n, (&c, &e)) in coeffs.iter().zip(&self.spectrum.energies).enumerate() {
            let ph = c * C64::from_polar(1.0, -e * t);
            for (o, &x) in out.iter_mut().zip(self.spectrum.vectors.column(n).iter()) {
                *o += ph * x;
            }
        }
        out
    }

    pub fn evolve(&self, v: &[C64], t: f64) -> Vec<C64> {
        self.state_at(&self.coefficients(v), t)
    }

    pub fn evolve_density(&self, rho: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
        let v = self.spectrum.vectors.map(|x| C64::new(x, 0.0));
        let mut r = v.transpose() * rho * &v;
        let e = &self.spectrum.energies;
        for m in 0..r.nrows() {
            for n in 0..r.ncols() {
                r[(m, n)] *= C64::from_polar(1.0, -(e[m] - e[n]) * t);
            }
        }
        &v * r * v.transpose()
    }
}

/// `exp(-i H t) v` through a full eigendecomposition (reference path).
pub fn evolve_dense(op: &SparseOperator, v: &StateVector, t: f64, cap: usize) -> Result<StateVector> {
    check_basis(op, v)?;
    let ev = DenseEvolver::new(op, cap)?;
    Ok(v.with_amplitudes(ev.evolve(v.amplitudes(), t)))
}

/// `exp(-iHt) rho exp(+iHt)` in the eigenbasis of `H`.
pub fn evolve_density(op: &SparseOperator, rho: &DensityOperator, t: f64, cap: usize) -> Result<DensityOperator> {
    if rho.basis() != op.basis() {
        return Err(Error::domain("density operator and Hamiltonian live on different bases"));
    }
    let ev = DenseEvolver::new(op, cap)?;
    DensityOperator::new(rho.shared_basis(), ev.evolve_density(rho.matrix(), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SectorBasis;
    use crate::hamiltonian::{build_total_hamiltonian, Bond, ChainSpec};
    use std::sync::Arc;

    fn random_state(basis: Arc<SectorBasis>, seed: u64) -> StateVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..basis.len())
            .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let mut v = StateVector::new(basis, amps).unwrap();
        v.normalize().unwrap();
        v
    }

    #[test]
    fn two_level_rabi() {
        let b = Arc::new(SectorBasis::new(2, 1).unwrap());
        let j = 0.7;
        let h = SparseOperator::from_bonds(b.clone(), &[Bond { a: 0, b: 1, strength: j }], 0.0).unwrap();
        let v = StateVector::basis_state(b, 0b01).unwrap();
        for &t in &[0.0, 0.3, 1.7, 5.0] {
            let out = evolve_krylov(&h, &v, t, 1e-12).unwrap();
            let a = out.amplitudes();
            assert!((a[0] - C64::new((2.0 * j * t).cos(), 0.0)).norm() < 1e-12);
            assert!((a[1] - C64::new(0.0, -(2.0 * j * t).sin())).norm() < 1e-12);
        }
    }

    #[test]
    fn krylov_matches_dense_and_reverses() {
        let chain = ChainSpec::symmetric(4, 0.5, 0.75, 0.6);
        let b = Arc::new(SectorBasis::half_filled(8).unwrap());
        let h = build_total_hamiltonian(&chain, b.clone()).unwrap();
        let v = random_state(b, 7);
        for &t in &[0.5, 9.0, 50.0] {
            let k = evolve_krylov(&h, &v, t, 1e-10).unwrap();
            let d = evolve_dense(&h, &v, t, 6000).unwrap();
            let dev = k
                .amplitudes()
                .iter()
                .zip(d.amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-8, "t = {t}: {dev}");
            assert!((k.norm() - 1.0).abs() < 1e-10);
            let back = evolve_krylov(&h, &k, -t, 1e-10).unwrap();
            let err = back
                .amplitudes()
                .iter()
                .zip(v.amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-9);
        }
    }

    #[test]
    fn trajectory_visits_every_sample_once() {
        let chain = ChainSpec::symmetric(4, 0.5, 0.75, 0.0);
        let b = Arc::new(SectorBasis::half_filled(8).unwrap());
        let h = build_total_hamiltonian(&chain, b.clone()).unwrap();
        let v = random_state(b, 3);
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
        let ev = DenseEvolver::new(&h, 6000).unwrap();
        let c = ev.coefficients(v.amplitudes());
        let mut seen = vec![0; times.len()];
        let mut prop = KrylovPropagator::new(&h, KrylovOptions::default());
        prop.trajectory(v.amplitudes(), &times, |i, s| {
            seen[i] += 1;
            let want = ev.state_at(&c, times[i]);
            let dev = s.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(dev < 1e-9, "sample {i}: {dev}");
            Ok(())
        })
        .unwrap();
        assert!(seen.iter().all(|&n| n == 1));
        assert!(prop.stats().steps > 0);
    }

    #[test]
    fn rejects_unsorted_times() {
        let b = Arc::new(SectorBasis::new(2, 1).unwrap());
        let h = SparseOperator::from_bonds(b.clone(), &[Bond { a: 0, b: 1, strength: 1.0 }], 0.0).unwrap();
        let v = StateVector::basis_state(b, 1).unwrap();
        let mut p = KrylovPropagator::new(&h, KrylovOptions::default());
        assert!(p.trajectory(v.amplitudes(), &[1.0, 0.5], |_, _| Ok(())).is_err());
        assert!(p.trajectory(v.amplitudes(), &[-1.0, 0.5], |_, _| Ok(())).is_err());
    }

    #[test]
    fn density_evolution() {
        let chain = ChainSpec::symmetric(4, 0.5, 0.75, 1.0);
        let b = Arc::new(SectorBasis::new(8, 3).unwrap());
        let h = build_total_hamiltonian(&chain, b.clone()).unwrap();
        let mixed = DensityOperator::maximally_mixed(b.clone());
        let out = evolve_density(&h, &mixed, 3.3, 6000).unwrap();
        assert!((out.matrix() - mixed.matrix()).camax() < 1e-12);

        let v = random_state(b, 11);
        let pure = DensityOperator::pure(&v);
        let t = 2.1;
        let evolved = evolve_density(&h, &pure, t, 6000).unwrap();
        let psi = evolve_dense(&h, &v, t, 6000).unwrap();
        let expect = DensityOperator::pure(&psi);
        assert!((evolved.matrix() - expect.matrix()).camax() < 1e-12);
        assert!((evolved.trace() - C64::new(1.0, 0.0)).norm() < 1e-10);
    }
}
