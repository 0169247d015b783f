//! Run configuration: defaults, config files and command-line overrides.
//!
//! Precedence, lowest first: built-in defaults, top-level keys of the config
//! file, the file's section named after the subcommand, command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use qamp_core::dynamics::KrylovOptions;
use qamp_core::eigensolve::EigenOptions;
use qamp_core::experiments::{linear_grid, log_grid, DisorderMode, ExperimentOptions, PeakRule, TimeWindow};
use qamp_core::{ChainSpec, ModuleSpec};
use serde::{Deserialize, Serialize};

/// Every tunable of a run. Couplings are in units of J, times in hbar/J,
/// temperatures in J with k_B = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Sites in the left module.
    pub n_left: usize,
    /// Sites in the right module.
    pub n_right: usize,
    /// Bulk exchange.
    pub j: f64,
    /// Impurity bond at each module end.
    pub j_prime: f64,
    /// Quench bond joining the modules.
    pub j_i: f64,
    /// Anisotropy: 0 for XX, 1 for Heisenberg.
    pub delta: f64,
    /// `[start, stop, step]` for the J' scan.
    pub j_prime_grid: [f64; 3],
    /// `[start, stop, step]` for the J_I scan.
    pub j_i_grid: [f64; 3],
    /// When nonzero, the J_I scan takes this many log-spaced points between
    /// the start and stop of `j_i_grid` instead.
    pub j_i_log_points: usize,
    pub t_max: f64,
    pub samples: usize,
    /// Disorder half-width.
    pub lambda: f64,
    pub realizations: usize,
    pub disorder_mode: DisorderMode,
    pub seed: u64,
    /// Temperatures for thermal runs.
    pub temperatures: Vec<f64>,
    pub krylov_tol: f64,
    pub eigen_tol: f64,
    pub dense_threshold: usize,
    pub dense_cap: usize,
    pub thermal_max_sites: usize,
    pub max_failure_fraction: f64,
    pub refine_peaks: bool,
    /// `global` or `first`.
    pub peak_rule: PeakRule,
    /// Worker threads; 0 runs on the calling thread.
    pub workers: usize,
    /// Output directory.
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = (0..=24).map(|k| 10f64.powf(-3.0 + 0.25 * k as f64)).collect();
        let eigen = EigenOptions::default();
        Self {
            n_left: 4,
            n_right: 4,
            j: 1.0,
            j_prime: 0.5,
            j_i: 0.75,
            delta: 0.0,
            j_prime_grid: [0.10, 1.50, 0.05],
            j_i_grid: [0.10, 2.00, 0.05],
            j_i_log_points: 0,
            t_max: 40.0,
            samples: 801,
            lambda: 0.1,
            realizations: 50,
            disorder_mode: DisorderMode::PerBond,
            seed: 1,
            temperatures: t,
            krylov_tol: KrylovOptions::default().tol,
            eigen_tol: eigen.tol,
            dense_threshold: eigen.dense_threshold,
            dense_cap: eigen.dense_cap,
            thermal_max_sites: 14,
            max_failure_fraction: 0.05,
            refine_peaks: true,
            peak_rule: PeakRule::default(),
            workers: 0,
            out: PathBuf::from("."),
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Config file (TOML, or a JSON run summary).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub n_left: Option<usize>,
    #[arg(long, global = true)]
    pub n_right: Option<usize>,
    /// Sets both module sizes.
    #[arg(long, global = true)]
    pub n_half: Option<usize>,
    #[arg(long, global = true)]
    pub j: Option<f64>,
    #[arg(long, global = true)]
    pub j_prime: Option<f64>,
    #[arg(long, global = true)]
    pub j_i: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// `start,stop,step`
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub j_prime_grid: Option<Vec<f64>>,
    /// `start,stop,step`
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub j_i_grid: Option<Vec<f64>>,
    /// Log-spaced J_I scan with this many points over the `--j-i-grid` range.
    #[arg(long, global = true)]
    pub j_i_log_points: Option<usize>,
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub realizations: Option<usize>,
    /// per-bond, bulk-only or per-chain
    #[arg(long, global = true)]
    pub disorder_mode: Option<String>,
    /// Comma-separated temperatures in units of J.
    #[arg(long, global = true, value_delimiter = ',')]
    pub temperatures: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub krylov_tol: Option<f64>,
    #[arg(long, global = true)]
    pub eigen_tol: Option<f64>,
    #[arg(long, global = true)]
    pub dense_cap: Option<usize>,
    #[arg(long, global = true)]
    pub thermal_max_sites: Option<usize>,
    /// global or first
    #[arg(long, global = true)]
    pub peak_rule: Option<String>,
    /// Report the raw grid maximum without quadratic refinement.
    #[arg(long, global = true)]
    pub no_refine: bool,
}

/// Reads a config file. JSON summaries contribute their `parameters` block.
pub fn load_file(path: &Path, section: &str) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let params = v.get("parameters").cloned().unwrap_or(v);
        return serde_json::from_value(params).with_context(|| format!("parameters in {}", path.display()));
    }
    let mut table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
    let sections = [
        "gap",
        "static",
        "trace",
        "peak",
        "optimize",
        "amplify",
        "perturbative",
        "spectral",
        "thermal",
        "disorder",
    ];
    let own = match table.remove(section) {
        Some(toml::Value::Table(t)) => Some(t),
        Some(_) => bail!("[{section}] in {} must be a table", path.display()),
        None => None,
    };
    table.retain(|k, _| !sections.contains(&k));
    if let Some(own) = own {
        table.extend(own);
    }
    toml::Value::Table(table)
        .try_into()
        .with_context(|| format!("config keys in {}", path.display()))
}

impl RunConfig {
    pub fn resolve(section: &str, o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => load_file(p, section)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f.clone() { c.$f = v; } )* };
        }
        set!(out, seed, workers, n_left, n_right, j, j_prime, j_i, delta, t_max, samples, lambda);
        set!(realizations, temperatures, krylov_tol, eigen_tol, dense_cap, thermal_max_sites);
        if let Some(n) = o.n_half {
            c.n_left = n;
            c.n_right = n;
        }
        if let Some(g) = &o.j_prime_grid {
            c.j_prime_grid = triple("--j-prime-grid", g)?;
        }
        if let Some(g) = &o.j_i_grid {
            c.j_i_grid = triple("--j-i-grid", g)?;
        }
        set!(j_i_log_points);
        if let Some(m) = &o.disorder_mode {
            c.disorder_mode = m.parse()?;
        }
        if let Some(r) = &o.peak_rule {
            c.peak_rule = r.parse()?;
        }
        if o.no_refine {
            c.refine_peaks = false;
        }
        Ok(c)
    }

    pub fn module(&self, n: usize) -> ModuleSpec {
        let mut m = ModuleSpec::new(n, self.j_prime, self.delta);
        m.j = self.j;
        m
    }

    pub fn chain(&self) -> ChainSpec {
        ChainSpec {
            left: self.module(self.n_left),
            right: self.module(self.n_right),
            j_i: self.j_i,
            bond_factors: None,
        }
    }

    pub fn window(&self) -> TimeWindow {
        TimeWindow::new(self.t_max, self.samples)
    }

    pub fn j_i_values(&self) -> Result<Vec<f64>> {
        if self.j_i_log_points == 0 {
            return Self::grid(self.j_i_grid);
        }
        let [start, stop, _] = self.j_i_grid;
        if !(start > 0.0 && stop >= start && stop.is_finite()) {
            bail!("log grid needs 0 < start <= stop, got {start},{stop}");
        }
        Ok(log_grid(start, stop, self.j_i_log_points))
    }

    pub fn grid(g: [f64; 3]) -> Result<Vec<f64>> {
        let [start, stop, step] = g;
        if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
            bail!("grid needs start <= stop and step > 0, got {start},{stop},{step}");
        }
        Ok(linear_grid(start, stop, step))
    }

    pub fn options(&self) -> ExperimentOptions {
        let mut o = ExperimentOptions::default();
        o.krylov.tol = self.krylov_tol;
        o.eigen.tol = self.eigen_tol;
        o.eigen.dense_threshold = self.dense_threshold;
        o.eigen.dense_cap = self.dense_cap;
        o.workers = self.workers;
        o.thermal_max_sites = self.thermal_max_sites;
        o.max_failure_fraction = self.max_failure_fraction;
        o.refine_peaks = self.refine_peaks;
        o.peak_rule = self.peak_rule;
        o
    }
}

fn triple(flag: &str, g: &[f64]) -> Result<[f64; 3]> {
    match g {
        &[a, b, c] => Ok([a, b, c]),
        _ => bail!("{flag} takes start,stop,step"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_overrides_top_level() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "delta = 1.0\nj_prime = 0.3\n[trace]\nj_prime = 0.4\n[optimize]\nj_prime = 0.9\n").unwrap();
        let c = load_file(&p, "trace").unwrap();
        assert_eq!((c.delta, c.j_prime), (1.0, 0.4));
        let c = load_file(&p, "gap").unwrap();
        assert_eq!(c.j_prime, 0.3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "jprime = 0.3\n").unwrap();
        assert!(load_file(&p, "trace").is_err());
    }

    #[test]
    fn flags_win() {
        let o = Overrides {
            n_half: Some(6),
            delta: Some(1.0),
            no_refine: true,
            ..Default::default()
        };
        let c = RunConfig::resolve("trace", &o).unwrap();
        assert_eq!((c.n_left, c.n_right, c.delta, c.refine_peaks), (6, 6, 1.0, false));
    }
}
