//! `qamp`: command-line driver for the entanglement-amplification
//! experiments. Each run writes one or more CSV tables and a JSON summary
//! into the output directory.

mod config;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use qamp_core::eigensolve::energy_gap;
use qamp_core::experiments::{
    amplification_scan, disorder_ensemble, entanglement_trace, interference_check, optimize_couplings,
    peak_of_chain, perturbative_prediction, plateau_width, spectral_decomposition, spectral_trace,
    static_end_entanglement, thermal_curve, CouplingGrid, DisorderParams,
};
use serde_json::{json, Value};

use config::{Overrides, RunConfig};
use output::{Cell, Summary, Table};

#[derive(Parser)]
#[command(name = "qamp", version, about = "Entanglement amplification in quenched modular XXZ chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Lowest gap of each module across magnetization sectors
    Gap,
    /// Ground-state entanglement between the two impurities of each module
    Static,
    /// E(t) between the outer impurities after the quench
    Trace,
    /// Peak time and value of E(t)
    Peak,
    /// Exhaustive search over (J', J_I)
    Optimize,
    /// Static versus dynamic entanglement for each J'
    Amplify,
    /// Weak-coupling prediction next to the simulated trace
    Perturbative,
    /// Overlaps with the post-quench eigenstates and the two-level interference time
    Spectral,
    /// Peak entanglement from a thermal initial state
    Thermal,
    /// Ensemble of randomly perturbed couplings
    Disorder,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gap => "gap",
            Command::Static => "static",
            Command::Trace => "trace",
            Command::Peak => "peak",
            Command::Optimize => "optimize",
            Command::Amplify => "amplify",
            Command::Perturbative => "perturbative",
            Command::Spectral => "spectral",
            Command::Thermal => "thermal",
            Command::Disorder => "disorder",
        }
    }
}

use Cell::{B, F, I, S};

fn bell_cells(m: &qamp_core::BellMix) -> [Cell; 4] {
    [F(m.p_s), F(m.p_x), F(m.p_y), F(m.p_z)]
}

fn symmetric_size(c: &RunConfig) -> Result<usize> {
    if c.n_left != c.n_right {
        bail!("this experiment needs equal module sizes, got {} and {}", c.n_left, c.n_right);
    }
    Ok(c.n_left)
}

fn run(cmd: Command, c: &RunConfig) -> Result<(Value, Vec<Table>)> {
    let opts = c.options();
    let chain = c.chain();
    let window = c.window();
    match cmd {
        Command::Gap => {
            let mut t = Table::new(
                "gap",
                &["module", "n_sites", "e0[J]", "e1[J]", "gap[J]", "ground_sector", "gap_sector", "sector_gap[J]"],
            );
            let mut res = serde_json::Map::new();
            for (name, spec) in [("left", &chain.left), ("right", &chain.right)] {
                let g = energy_gap(spec, &opts.eigen)?;
                t.push(vec![
                    S(name.into()),
                    I(spec.n_sites),
                    F(g.e0),
                    F(g.e1),
                    F(g.delta),
                    I(g.ground_sector),
                    I(g.sector_of_gap),
                    F(g.sector_gap),
                ]);
                res.insert(name.into(), json!(g));
            }
            Ok((Value::Object(res), vec![t]))
        }
        Command::Static => {
            let mut t = Table::new("static", &["module", "n_sites", "E", "C", "p_s", "p_x", "p_y", "p_z"]);
            let mut res = serde_json::Map::new();
            for (name, spec) in [("left", &chain.left), ("right", &chain.right)] {
                let s = static_end_entanglement(spec, &opts)?;
                let mut row = vec![S(name.into()), I(spec.n_sites), F(s.value.e), F(s.value.c)];
                row.extend(bell_cells(&s.bell));
                t.push(row);
                res.insert(name.into(), json!({ "e": s.value.e, "c": s.value.c }));
            }
            Ok((Value::Object(res), vec![t]))
        }
        Command::Trace => {
            let tr = entanglement_trace(&chain, &window.grid()?, &opts)?;
            let mut t = Table::new("trace", &["t[hbar/J]", "E", "p_s", "p_x", "p_y", "p_z"]);
            for ((&time, &e), m) in tr.times.iter().zip(&tr.e).zip(&tr.bell) {
                let mut row = vec![F(time), F(e)];
                row.extend(bell_cells(m));
                t.push(row);
            }
            let peak = opts.peak(&tr.times, &tr.e);
            let res = json!({
                "peak": peak,
                "max_bell_residual": tr.max_bell_residual(),
                "krylov": tr.krylov,
            });
            Ok((res, vec![t]))
        }
        Command::Peak => {
            let p = peak_of_chain(&chain, &window, &opts)?;
            let mut t = Table::new("peak", &["t_opt[hbar/J]", "e_max", "index", "refined", "window_truncated"]);
            t.push(vec![F(p.t_opt), F(p.e_max), I(p.index), B(p.refined), B(p.window_truncated)]);
            Ok((json!(p), vec![t]))
        }
        Command::Optimize => {
            let grid = CouplingGrid {
                n_half: symmetric_size(c)?,
                delta: c.delta,
                j_prime: RunConfig::grid(c.j_prime_grid)?,
                j_i: c.j_i_values()?,
                window,
            };
            let r = optimize_couplings(&grid, &opts)?;
            let mut t = Table::new(
                "optimize",
                &["j_prime[J]", "j_i[J]", "e_max", "t_opt[hbar/J]", "window_truncated", "error"],
            );
            for p in &r.surface {
                let (e, topt, trunc) = match p.peak {
                    Some(pk) => (pk.e_max, pk.t_opt, pk.window_truncated),
                    None => (f64::NAN, f64::NAN, false),
                };
                t.push(vec![F(p.j_prime), F(p.j_i), F(e), F(topt), B(trunc), S(p.error.clone().unwrap_or_default())]);
            }
            let res = json!({
                "best_j_prime": r.best_j_prime,
                "best_j_i": r.best_j_i,
                "e_max": r.best.e_max,
                "t_opt": r.best.t_opt,
                "window_truncated": r.best.window_truncated,
                "failures": r.failures,
            });
            Ok((res, vec![t]))
        }
        Command::Amplify => {
            let grid = CouplingGrid {
                n_half: symmetric_size(c)?,
                delta: c.delta,
                j_prime: RunConfig::grid(c.j_prime_grid)?,
                j_i: c.j_i_values()?,
                window,
            };
            let scan = amplification_scan(&grid, &opts)?;
            let mut best = Table::new("amplify", &["j_prime[J]", "e_static", "e_max", "best_j_i[J]", "t_opt[hbar/J]"]);
            let mut fixed = Table::new("amplify_fixed", &["j_prime[J]", "j_i[J]", "e_max", "t_opt[hbar/J]"]);
            for r in &scan.rows {
                best.push(vec![F(r.j_prime), F(r.e_static), F(r.e_max), F(r.best_j_i), F(r.t_opt)]);
                for (ji, p) in &r.per_j_i {
                    fixed.push(vec![F(r.j_prime), F(*ji), F(p.e_max), F(p.t_opt)]);
                }
            }
            let all = scan.rows.iter().all(|r| r.amplified());
            let res = json!({ "amplified_everywhere": all, "rows": scan.rows.len(), "failures": scan.failures });
            Ok((res, vec![best, fixed]))
        }
        Command::Perturbative => {
            let p = perturbative_prediction(&chain.left, &chain.right, &opts)?;
            let sim = entanglement_trace(&chain.with_j_i(p.j_i_star), &window.grid()?, &opts)?;
            let mut t = Table::new("perturbative", &["t[hbar/J]", "p_singlet", "E_pred", "E_sim"]);
            let mut dev: f64 = 0.0;
            for (&time, &e) in sim.times.iter().zip(&sim.e) {
                t.push(vec![F(time), F(p.singlet_weight(time)), F(p.entanglement(time)), F(e)]);
                if time <= 1.1 * p.t_opt_pred {
                    dev = dev.max((p.entanglement(time) - e).abs());
                }
            }
            let res = json!({
                "prediction": p,
                "simulated_peak": opts.peak(&sim.times, &sim.e),
                "max_deviation_to_1.1_t_opt": dev,
            });
            Ok((res, vec![t]))
        }
        Command::Spectral => {
            let d = spectral_decomposition(&chain, &opts)?;
            let tr = entanglement_trace(&chain, &window.grid()?, &opts)?;
            let peak = opts.peak(&tr.times, &tr.e);
            let rebuilt = spectral_trace(&chain, &d, &tr.times)?;
            let report = interference_check(&d, &peak)?;
            let mut levels = Table::new("spectral", &["n", "excitation[J]", "weight"]);
            for (n, (&x, &w)) in d.excitations.iter().zip(&d.weights).enumerate() {
                levels.push(vec![I(n), F(x), F(w)]);
            }
            let mut cmp = Table::new("spectral_trace", &["t[hbar/J]", "E_krylov", "E_spectral"]);
            let mut dev: f64 = 0.0;
            for ((&time, &e), (es, _)) in tr.times.iter().zip(&tr.e).zip(&rebuilt) {
                cmp.push(vec![F(time), F(e), F(*es)]);
                dev = dev.max((e - es).abs());
            }
            let res = json!({
                "top": d.top,
                "top_weights": [d.weights[d.top[0]], d.weights[d.top[1]]],
                "two_level_dominance": d.two_level_dominance(),
                "total_weight": d.total_weight(),
                "interference": report,
                "peak": peak,
                "max_reconstruction_deviation": dev,
            });
            Ok((res, vec![levels, cmp]))
        }
        Command::Thermal => {
            let mut temps = vec![0.0];
            temps.extend(c.temperatures.iter().copied().filter(|&t| t != 0.0));
            let pts = thermal_curve(&chain, &temps, &window, &opts)?;
            let ground = pts[0].e_max;
            let shown: Vec<_> = pts
                .iter()
                .filter(|p| p.temperature != 0.0 || c.temperatures.contains(&0.0))
                .collect();
            let mut t = Table::new("thermal", &["T[J]", "e_max", "t_peak[hbar/J]"]);
            for p in &shown {
                t.push(vec![F(p.temperature), F(p.e_max), F(p.t_peak)]);
            }
            let res = json!({
                "e_max_ground_state": ground,
                "plateau_width_5pct": plateau_width(&pts[1..], ground, 0.05),
                "points": shown.len(),
            });
            Ok((res, vec![t]))
        }
        Command::Disorder => {
            let params = DisorderParams {
                lambda: c.lambda,
                n_realizations: c.realizations,
                seed: c.seed,
                mode: c.disorder_mode,
            };
            let s = disorder_ensemble(&chain, &params, &window, &opts)?;
            let mut t = Table::new(
                "disorder",
                &["realization", "e_max", "t_peak[hbar/J]", "e_at_clean_t_opt"],
            );
            for r in &s.realizations {
                t.push(vec![I(r.index), F(r.peak.e_max), F(r.peak.t_opt), F(r.e_at_clean_topt)]);
            }
            let res = json!({
                "lambda": s.lambda,
                "n_realizations": s.n_realizations,
                "mode": s.mode,
                "clean": s.clean,
                "mean_e_max": s.mean_e_max,
                "se_e_max": s.se_e_max,
                "mean_e_at_clean_t_opt": s.mean_e_at_clean_topt,
                "se_e_at_clean_t_opt": s.se_e_at_clean_topt,
                "mean_t_peak": s.mean_t_peak,
                "se_t_peak": s.se_t_peak,
                "failures": s.failures,
            });
            Ok((res, vec![t]))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let cfg = match RunConfig::resolve(name, &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qamp: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.out) {
        eprintln!("qamp: cannot create {}: {e}", cfg.out.display());
        return ExitCode::from(2);
    }
    let start = Instant::now();
    let outcome = run(cli.command, &cfg).and_then(|(results, tables)| {
        let mut outputs = Vec::new();
        for t in &tables {
            outputs.push(t.write(&cfg.out)?);
        }
        let summary = Summary {
            experiment: name,
            config: &cfg,
            wall_time_s: start.elapsed().as_secs_f64(),
            results,
            outputs,
        };
        summary.write(&cfg.out)
    });
    match outcome {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qamp: {name}: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
