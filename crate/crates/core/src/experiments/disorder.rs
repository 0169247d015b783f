use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trace::trace_from_state;
use super::{check_failures, initial_product_state, ExperimentOptions, PeakResult, TimeWindow};
use crate::error::{Error, Result};
use crate::hamiltonian::ChainSpec;

/// Which couplings receive a random factor `1 + eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderMode {
    /// Every bond gets its own draw, impurity and quench bonds included.
    #[default]
    PerBond,
    /// Only bulk `J` bonds are perturbed; `J'` and `J_I` stay clean.
    BulkOnly,
    /// One draw shared by all bonds of a realization.
    PerChain,
}

impl std::str::FromStr for DisorderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-bond" => Ok(Self::PerBond),
            "bulk-only" => Ok(Self::BulkOnly),
            "per-chain" => Ok(Self::PerChain),
            _ => Err(Error::domain(format!(
                "unknown disorder mode {s:?}, expected per-bond, bulk-only or per-chain"
            ))),
        }
    }
}

/// Uniform draw in `[-lambda, lambda)` keyed by (seed, realization, bond).
fn draw(seed: u64, realization: u64, bond: u64, lambda: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization);
    rng.set_word_pos(2 * bond as u128);
    let u: f64 = rng.gen();
    lambda * (2.0 * u - 1.0)
}

/// Bond factors for one realization in linear bond order.
pub fn draw_bond_factors(chain: &ChainSpec, lambda: f64, seed: u64, realization: u64, mode: DisorderMode) -> Vec<f64> {
    let nb = chain.n_bonds();
    let nl = chain.left.n_sites;
    let impurity = |b: usize| b == 0 || b == nl - 2 || b == nl - 1 || b == nl || b == nb - 1;
    (0..nb)
        .map(|b| match mode {
            DisorderMode::PerBond => 1.0 + draw(seed, realization, b as u64, lambda),
            DisorderMode::BulkOnly if impurity(b) => 1.0,
            DisorderMode::BulkOnly => 1.0 + draw(seed, realization, b as u64, lambda),
            DisorderMode::PerChain => 1.0 + draw(seed, realization, 0, lambda),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderParams {
    /// Half-width of the uniform distribution of `eps`.
    pub lambda: f64,
    pub n_realizations: usize,
    pub seed: u64,
    pub mode: DisorderMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    pub index: usize,
    pub factors: Vec<f64>,
    pub peak: PeakResult,
    /// `E` at the clean system's optimal time.
    pub e_at_clean_topt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisorderStats {
    pub lambda: f64,
    pub n_realizations: usize,
    pub seed: u64,
    pub mode: DisorderMode,
    /// Clean reference on the same sample grid.
    pub clean: PeakResult,
    pub mean_e_max: f64,
    pub se_e_max: f64,
    pub mean_e_at_clean_topt: f64,
    pub se_e_at_clean_topt: f64,
    pub mean_t_peak: f64,
    pub se_t_peak: f64,
    pub failures: usize,
    pub realizations: Vec<Realization>,
}

/// Running mean and standard error; identical inputs give their value back
/// exactly and a zero error.
#[derive(Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Sample grid with `t` inserted, and the index of `t` in it.
fn grid_with(times: &[f64], t: f64) -> (Vec<f64>, usize) {
    let pos = times.partition_point(|&x| x < t);
    if pos < times.len() && times[pos] == t {
        return (times.to_vec(), pos);
    }
    let mut out = times.to_vec();
    out.insert(pos, t);
    (out, pos)
}

fn run_realization(
    chain: &ChainSpec,
    times: &[f64],
    at: usize,
    opts: &ExperimentOptions,
) -> Result<(PeakResult, f64)> {
    let psi0 = initial_product_state(chain, opts)?;
    let trace = trace_from_state(chain, &psi0, times, opts)?;
    Ok((opts.peak(times, &trace.e), trace.e[at]))
}

/// Ensemble of disordered copies of `chain`. Each realization recomputes the
/// module ground states with its own bonds; `E(t_opt)` is read at the clean
/// system's peak time.
pub fn disorder_ensemble(
    chain: &ChainSpec,
    params: &DisorderParams,
    window: &TimeWindow,
    opts: &ExperimentOptions,
) -> Result<DisorderStats> {
    if !(params.lambda >= 0.0 && params.lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must be >= 0, got {}", params.lambda)));
    }
    if params.n_realizations == 0 {
        return Err(Error::domain("need at least one realization"));
    }
    let mut clean_chain = chain.clone();
    clean_chain.bond_factors = None;
    clean_chain.validate()?;
    let base = window.grid()?;
    let psi0 = initial_product_state(&clean_chain, opts)?;
    let first = trace_from_state(&clean_chain, &psi0, &base, opts)?;
    let t_clean = opts.peak(&base, &first.e).t_opt;
    let (times, at) = grid_with(&base, t_clean);

    let clean_factors = vec![1.0; chain.n_bonds()];
    let (clean, _) = {
        let mut c = clean_chain.clone();
        c.bond_factors = Some(clean_factors);
        run_realization(&c, &times, at, opts)?
    };

    let results: Vec<Result<Realization>> = opts.install(|| {
        (0..params.n_realizations)
            .into_par_iter()
            .map(|r| {
                let factors = draw_bond_factors(chain, params.lambda, params.seed, r as u64, params.mode);
                let mut c = clean_chain.clone();
                c.bond_factors = Some(factors.clone());
                let (peak, e_at) = run_realization(&c, &times, at, opts)?;
                Ok(Realization {
                    index: r,
                    factors,
                    peak,
                    e_at_clean_topt: e_at,
                })
            })
            .collect()
    });
    let mut errors = Vec::new();
    let mut realizations = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(x) => realizations.push(x),
            Err(e) => errors.push(format!("realization {r}: {e}")),
        }
    }
    check_failures(&errors, params.n_realizations, opts.max_failure_fraction)?;
    if realizations.is_empty() {
        return Err(Error::TooManyFailures {
            failed: errors.len(),
            total: params.n_realizations,
            first: errors[0].clone(),
        });
    }
    let (mut e_max, mut e_at, mut t_peak) = (Welford::default(), Welford::default(), Welford::default());
    for r in &realizations {
        e_max.push(r.peak.e_max);
        e_at.push(r.e_at_clean_topt);
        t_peak.push(r.peak.t_opt);
    }
    Ok(DisorderStats {
        lambda: params.lambda,
        n_realizations: params.n_realizations,
        seed: params.seed,
        mode: params.mode,
        clean,
        mean_e_max: e_max.mean,
        se_e_max: e_max.std_error(),
        mean_e_at_clean_topt: e_at.mean,
        se_e_at_clean_topt: e_at.std_error(),
        mean_t_peak: t_peak.mean,
        se_t_peak: t_peak.std_error(),
        failures: errors.len(),
        realizations,
    })
}
