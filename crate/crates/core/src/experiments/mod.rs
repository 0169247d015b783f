//! Drivers that turn the building blocks into the figure- and table-level
//! studies: entanglement traces, peak search, coupling optimization,
//! amplification scans, perturbative predictions, spectral interference,
//! thermal curves and disorder ensembles.

mod amplification;
mod disorder;
mod optimize;
mod peak;
mod perturbative;
mod spectral;
mod thermal;
mod trace;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use amplification::{amplification_scan, AmplificationRow, AmplificationScan};
pub use disorder::{disorder_ensemble, draw_bond_factors, DisorderMode, DisorderParams, DisorderStats, Realization};
pub use optimize::{optimize_couplings, CouplingGrid, OptimizeResult, SurfacePoint};
pub use peak::{find_peak, find_peak_in, find_peak_with, PeakResult, PeakRule};
pub use perturbative::{perturbative_prediction, PerturbativePrediction};
pub use spectral::{interference_check, spectral_decomposition, spectral_trace, InterferenceReport, SpectralDecomposition};
pub use thermal::{plateau_width, thermal_curve, thermal_traces, ThermalPoint, ThermalTrace};
pub use trace::{entanglement_trace, initial_product_state, peak_of_chain, static_end_entanglement, StaticEntanglement, TraceSeries};

use crate::basis::SectorBasis;
use crate::dynamics::KrylovOptions;
use crate::eigensolve::EigenOptions;
use crate::error::{Error, Result};

/// Uniform sampling of `[0, t_max]` (units hbar/J).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_max: f64,
    pub samples: usize,
}

impl Default for TimeWindow {
    fn default() -> Self {
        Self {
            t_max: 40.0,
            samples: 801,
        }
    }
}

impl TimeWindow {
    pub fn new(t_max: f64, samples: usize) -> Self {
        Self { t_max, samples }
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) || self.samples < 2 {
            return Err(Error::domain(format!(
                "time window needs t_max > 0 and at least 2 samples, got ({}, {})",
                self.t_max, self.samples
            )));
        }
        let dt = self.t_max / (self.samples - 1) as f64;
        Ok((0..self.samples).map(|i| i as f64 * dt).collect())
    }

    pub fn step(&self) -> f64 {
        self.t_max / (self.samples - 1) as f64
    }
}

/// Numerical settings shared by every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub eigen: EigenOptions,
    pub krylov: KrylovOptions,
    /// Worker threads for independent tasks; 0 picks one per core.
    pub workers: usize,
    /// Largest total chain length for thermal runs.
    pub thermal_max_sites: usize,
    /// Fraction of failed tasks that aborts a sweep.
    pub max_failure_fraction: f64,
    /// Apply the 3-point quadratic refinement to peaks.
    pub refine_peaks: bool,
    #[serde(default)]
    pub peak_rule: PeakRule,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            eigen: EigenOptions::default(),
            krylov: KrylovOptions::default(),
            workers: 0,
            thermal_max_sites: 14,
            max_failure_fraction: 0.05,
            refine_peaks: true,
            peak_rule: PeakRule::First,
        }
    }
}

impl ExperimentOptions {
    /// Peak of a sampled trace under the configured rule and refinement.
    pub fn peak(&self, times: &[f64], values: &[f64]) -> PeakResult {
        find_peak_with(times, values, self.refine_peaks, self.peak_rule)
    }

    /// Runs `f` on a pool with the configured number of workers.
    pub(crate) fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        if self.workers == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
}

/// Evenly spaced values `start, start + step, ...` up to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // rounding keeps 0.1 + k*0.05 readable in output files
    (0..=n)
        .map(|k| ((start + k as f64 * step) * 1e10).round() / 1e10)
        .collect()
}

/// `n` geometrically spaced values from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![start];
    }
    let ratio = (stop / start).ln() / (n - 1) as f64;
    (0..n)
        .map(|k| ((start.ln() + k as f64 * ratio).exp() * 1e10).round() / 1e10)
        .collect()
}

/// Half-filled joint basis for a chain of `n` sites.
pub(crate) fn joint_basis(n: usize) -> Result<Arc<SectorBasis>> {
    Ok(Arc::new(SectorBasis::half_filled(n)?))
}

/// Aborts when more than the allowed fraction of tasks failed.
pub(crate) fn check_failures(failures: &[String], total: usize, max_fraction: f64) -> Result<()> {
    if failures.is_empty() {
        return Ok(());
    }
    if failures.len() as f64 > max_fraction * total as f64 {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
            first: failures[0].clone(),
        });
    }
    Ok(())
}
