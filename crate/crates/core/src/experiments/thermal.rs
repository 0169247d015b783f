use std::sync::Arc;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use super::trace::two_qubit_entanglement;
use super::{ExperimentOptions, TimeWindow};
use crate::basis::SectorBasis;
use crate::eigensolve::{sorted_eigh, DEGENERACY_TOL};
use crate::entanglement::{BellMix, PairReducer};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_decoupled_hamiltonian, build_module_hamiltonian_with, build_total_hamiltonian, ChainSpec, ModuleSpec,
};

/// Sectors whose total Gibbs weight falls below this are dropped.
const NEGLIGIBLE_WEIGHT: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalPoint {
    /// `k_B T` in units of J.
    pub temperature: f64,
    pub e_max: f64,
    pub t_peak: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalTrace {
    pub temperature: f64,
    pub times: Vec<f64>,
    pub e: Vec<f64>,
    pub bell: Vec<BellMix>,
}

/// Peak entanglement reached from a Gibbs state of `H_L + H_R` at each
/// temperature, evolved under `H_T`. A temperature of 0 selects the ground
/// state projector.
pub fn thermal_curve(
    chain: &ChainSpec,
    temperatures: &[f64],
    window: &TimeWindow,
    opts: &ExperimentOptions,
) -> Result<Vec<ThermalPoint>> {
    let times = window.grid()?;
    let traces = thermal_traces(chain, temperatures, &times, opts)?;
    Ok(traces
        .iter()
        .map(|tr| {
            let p = opts.peak(&tr.times, &tr.e);
            ThermalPoint {
                temperature: tr.temperature,
                e_max: p.e_max,
                t_peak: p.t_opt,
            }
        })
        .collect())
}

/// Largest temperature whose `e_max` stays within `rel_tol` of `reference`,
/// scanning upward from the coldest point and stopping at the first miss.
pub fn plateau_width(points: &[ThermalPoint], reference: f64, rel_tol: f64) -> f64 {
    let mut sorted: Vec<&ThermalPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.temperature.total_cmp(&b.temperature));
    let mut width = 0.0;
    for p in sorted {
        if (p.e_max - reference).abs() > rel_tol * reference.abs() {
            break;
        }
        width = p.temperature;
    }
    width
}

/// Energies of one module over all magnetization sectors, ascending.
fn module_levels(spec: &ModuleSpec, factors: Option<&[f64]>, cap: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(1 << spec.n_sites);
    for n_up in 0..=spec.n_sites {
        let basis = Arc::new(SectorBasis::new(spec.n_sites, n_up)?);
        let h = build_module_hamiltonian_with(spec, factors, basis)?;
        if h.dim() > cap {
            return Err(Error::Capacity { dim: h.dim(), cap });
        }
        out.extend(sorted_eigh(h.to_dense()).0);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

pub fn thermal_traces(
    chain: &ChainSpec,
    temperatures: &[f64],
    times: &[f64],
    opts: &ExperimentOptions,
) -> Result<Vec<ThermalTrace>> {
    chain.validate()?;
    let n = chain.n_sites();
    if n > opts.thermal_max_sites {
        return Err(Error::Capacity {
            dim: 1 << n,
            cap: 1 << opts.thermal_max_sites,
        });
    }
    if temperatures.is_empty() {
        return Err(Error::domain("temperature grid is empty"));
    }
    for &t in temperatures {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("temperature must be finite and >= 0, got {t}")));
        }
    }
    if times.is_empty() {
        return Err(Error::domain("time grid is empty"));
    }
    let cap = opts.eigen.dense_cap;
    let lf = chain.left_factors();
    let rf = chain.right_factors();
    let left = module_levels(&chain.left, lf.as_deref(), cap)?;
    let right = module_levels(&chain.right, rf.as_deref(), cap)?;
    for levels in [&left, &right] {
        if temperatures.contains(&0.0) && levels[1] - levels[0] < DEGENERACY_TOL {
            return Err(Error::DegenerateGround {
                gap: levels[1] - levels[0],
            });
        }
    }
    let e_min = left[0] + right[0];
    // Z = Z_L Z_R, accumulated relative to each module's ground energy
    let log_z: Vec<f64> = temperatures
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return 0.0;
            }
            let part = |lv: &[f64]| lv.iter().map(|e| (-(e - lv[0]) / t).exp()).sum::<f64>().ln();
            part(&left) + part(&right)
        })
        .collect();

    let sectors: Vec<Vec<[Vec<f64>; 3]>> = opts.install(|| {
        (0..=n)
            .into_par_iter()
            .map(|n_up| sector_contribution(chain, n_up, e_min, temperatures, &log_z, times, cap))
            .collect::<Result<Vec<_>>>()
    })?;

    let nt = times.len();
    let mut out = Vec::with_capacity(temperatures.len());
    for (k, &temp) in temperatures.iter().enumerate() {
        let mut acc = [vec![0.0; nt], vec![0.0; nt], vec![0.0; nt]];
        for sector in &sectors {
            for (a, s) in acc.iter_mut().zip(&sector[k]) {
                for (x, y) in a.iter_mut().zip(s) {
                    *x += y;
                }
            }
        }
        let mut e = Vec::with_capacity(nt);
        let mut bell = Vec::with_capacity(nt);
        for i in 0..nt {
            let (ei, mix) = two_qubit_entanglement(assemble(acc[0][i], acc[1][i], acc[2][i]));
            e.push(ei);
            bell.push(mix);
        }
        out.push(ThermalTrace {
            temperature: temp,
            times: times.to_vec(),
            e,
            bell,
        });
    }
    Ok(out)
}

/// Reduced matrix from `S = P01 + P10`, `D = P01 - P10` and `Re <01|rho|10>`;
/// spin-flip symmetry gives `P00 = P11`.
fn assemble(s: f64, d: f64, c: f64) -> Matrix4<C64> {
    let r = |x: f64| C64::new(x, 0.0);
    let mut m = Matrix4::zeros();
    m[(0, 0)] = r((1.0 - s) / 2.0);
    m[(3, 3)] = r((1.0 - s) / 2.0);
    m[(1, 1)] = r((s + d) / 2.0);
    m[(2, 2)] = r((s - d) / 2.0);
    m[(1, 2)] = r(c);
    m[(2, 1)] = r(c);
    m
}

/// One sector's share of `S`, `D` and `Re c` for every temperature and time.
fn sector_contribution(
    chain: &ChainSpec,
    n_up: usize,
    e_min: f64,
    temperatures: &[f64],
    log_z: &[f64],
    times: &[f64],
    cap: usize,
) -> Result<Vec<[Vec<f64>; 3]>> {
    let n = chain.n_sites();
    let nt = times.len();
    let basis = Arc::new(SectorBasis::new(n, n_up)?);
    let d = basis.len();
    if d > cap {
        return Err(Error::Capacity { dim: d, cap });
    }
    let h0 = build_decoupled_hamiltonian(chain, basis.clone())?;
    let ht = build_total_hamiltonian(chain, basis.clone())?;
    let (e0, u0) = sorted_eigh(h0.to_dense());

    let weights: Vec<Vec<f64>> = temperatures
        .iter()
        .zip(log_z)
        .map(|(&t, &lz)| {
            e0.iter()
                .map(|&e| {
                    if t == 0.0 {
                        if e - e_min < 0.5 * DEGENERACY_TOL {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        (-(e - e_min) / t - lz).exp()
                    }
                })
                .collect()
        })
        .collect();
    let live: Vec<bool> = weights.iter().map(|w| w.iter().sum::<f64>() >= NEGLIGIBLE_WEIGHT).collect();
    if !live.iter().any(|&l| l) {
        return Ok(vec![[vec![0.0; nt], vec![0.0; nt], vec![0.0; nt]]; temperatures.len()]);
    }

    let (energies, v) = sorted_eigh(ht.to_dense());
    let a = v.transpose() * &u0;
    drop(u0);

    let reducer = PairReducer::new(&basis, 0, n - 1)?;
    let class = reducer.classes();
    let diag_s: Vec<f64> = class.iter().map(|&c| if c == 1 || c == 2 { 1.0 } else { 0.0 }).collect();
    let diag_d: Vec<f64> = class
        .iter()
        .map(|&c| match c {
            1 => 1.0,
            2 => -1.0,
            _ => 0.0,
        })
        .collect();
    let in_eigenbasis = |ov: DMatrix<f64>| v.transpose() * ov;
    let obs_s = in_eigenbasis(DMatrix::from_fn(d, d, |r, c| diag_s[r] * v[(r, c)]));
    let obs_d = in_eigenbasis(DMatrix::from_fn(d, d, |r, c| diag_d[r] * v[(r, c)]));
    let mut ov = DMatrix::zeros(d, d);
    for &(i, j) in reducer.partners() {
        let (i, j) = (i as usize, j as usize);
        if class[i] == 1 && class[j] == 2 {
            for col in 0..d {
                ov[(i, col)] += 0.5 * v[(j, col)];
                ov[(j, col)] += 0.5 * v[(i, col)];
            }
        }
    }
    let obs_c = in_eigenbasis(ov);

    let cos = DMatrix::from_fn(d, nt, |m, k| (energies[m] * times[k]).cos());
    let sin = DMatrix::from_fn(d, nt, |m, k| (energies[m] * times[k]).sin());

    let per_temperature = |k: usize| -> [Vec<f64>; 3] {
        if !live[k] {
            return [vec![0.0; nt], vec![0.0; nt], vec![0.0; nt]];
        }
        let mut aw = a.clone();
        for (mut col, &w) in aw.column_iter_mut().zip(&weights[k]) {
            col *= w;
        }
        let rho = aw * a.transpose();
        let expect = |obs: &DMatrix<f64>| -> Vec<f64> {
            let w = obs.component_mul(&rho);
            let wc = &w * &cos;
            let ws = &w * &sin;
            (0..nt)
                .map(|t| cos.column(t).dot(&wc.column(t)) + sin.column(t).dot(&ws.column(t)))
                .collect()
        };
        [expect(&obs_s), expect(&obs_d), expect(&obs_c)]
    };
    Ok((0..temperatures.len()).into_par_iter().map(per_temperature).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DenseEvolver;
    use crate::entanglement::{bell_decompose, entanglement_e, TwoQubitDensity};

    #[test]
    fn matches_dense_density_evolution() {
        // full-space Gibbs state evolved sector by sector with explicit matrices
        let chain = ChainSpec::symmetric(4, 0.6, 0.8, 1.0);
        let opts = ExperimentOptions::default();
        let temps = [0.0, 0.7, 3.0];
        let times = [0.0, 0.4, 1.3, 2.9];
        let traces = thermal_traces(&chain, &temps, &times, &opts).unwrap();
        let n = chain.n_sites();
        for (k, &temp) in temps.iter().enumerate() {
            let mut blocks = Vec::new();
            let mut z = 0.0;
            let mut e_min = f64::INFINITY;
            for n_up in 0..=n {
                let b = Arc::new(SectorBasis::new(n, n_up).unwrap());
                let (e0, _) = sorted_eigh(build_decoupled_hamiltonian(&chain, b.clone()).unwrap().to_dense());
                e_min = e_min.min(e0[0]);
                blocks.push(b);
            }
            let mut rhos = Vec::new();
            for b in &blocks {
                let (e0, u0) = sorted_eigh(build_decoupled_hamiltonian(&chain, b.clone()).unwrap().to_dense());
                let w: Vec<f64> = e0
                    .iter()
                    .map(|&e| {
                        if temp == 0.0 {
                            ((e - e_min).abs() < 1e-9) as u8 as f64
                        } else {
                            (-(e - e_min) / temp).exp()
                        }
                    })
                    .collect();
                z += w.iter().sum::<f64>();
                let rho = &u0 * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w)) * u0.transpose();
                rhos.push(rho.map(|x| C64::new(x, 0.0)));
            }
            for (i, &t) in times.iter().enumerate() {
                let mut m = Matrix4::zeros();
                for (b, rho) in blocks.iter().zip(&rhos) {
                    let h = build_total_hamiltonian(&chain, b.clone()).unwrap();
                    let ev = DenseEvolver::new(&h, 100).unwrap();
                    let r = ev.evolve_density(rho, t);
                    m += PairReducer::new(b, 0, n - 1).unwrap().reduce_density(&r);
                }
                m /= C64::new(z, 0.0);
                let mix = bell_decompose(&TwoQubitDensity(m));
                assert!(mix.residual < 1e-12, "T={temp} t={t} residual {}", mix.residual);
                assert!(traces[k].bell[i].residual < 1e-12);
                let want = entanglement_e(&mix).e;
                assert!((traces[k].e[i] - want).abs() < 1e-10, "T={temp} t={t}");
                for (a, b) in traces[k].bell[i].weights().iter().zip(mix.weights()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn hot_state_stays_unentangled() {
        let chain = ChainSpec::symmetric(4, 0.6, 0.8, 0.0);
        let opts = ExperimentOptions::default();
        let pts = thermal_curve(&chain, &[1e3], &TimeWindow::new(10.0, 101), &opts).unwrap();
        assert!(pts[0].e_max < 1e-6);
    }

    #[test]
    fn rejects_oversized_and_negative() {
        let opts = ExperimentOptions::default();
        let big = ChainSpec::symmetric(8, 0.5, 0.5, 0.0);
        assert!(matches!(
            thermal_traces(&big, &[1.0], &[0.0], &opts),
            Err(Error::Capacity { .. })
        ));
        let small = ChainSpec::symmetric(4, 0.5, 0.5, 0.0);
        assert!(thermal_traces(&small, &[-1.0], &[0.0], &opts).is_err());
    }

    #[test]
    fn plateau() {
        let p = |t, e| ThermalPoint {
            temperature: t,
            e_max: e,
            t_peak: 0.0,
        };
        let pts = [p(0.01, 0.80), p(0.1, 0.79), p(1.0, 0.5), p(2.0, 0.79)];
        assert_eq!(plateau_width(&pts, 0.8, 0.05), 0.1);
    }
}
