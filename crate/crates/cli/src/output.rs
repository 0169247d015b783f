//! CSV tables and JSON run summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Ten significant digits: fixed notation for moderate magnitudes,
/// scientific otherwise.
pub fn sig10(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into one more integer digit, e.g. 9.99.. -> 10.0..
        let int_digits = s.trim_start_matches('-').split('.').next().map_or(0, str::len) as i32;
        if exp >= 0 && int_digits > exp + 1 && decimals > 0 {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.9e}")
    }
}

/// A CSV cell.
pub enum Cell {
    F(f64),
    I(usize),
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => sig10(*x),
            Cell::I(i) => i.to_string(),
            Cell::B(b) => b.to_string(),
            Cell::S(s) => {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
        }
    }
}

pub struct Table {
    pub name: &'static str,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, header: &'static [&'static str]) -> Self {
        Self {
            name,
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::render).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub struct Summary<'a> {
    pub experiment: &'a str,
    pub config: &'a RunConfig,
    pub wall_time_s: f64,
    pub results: Value,
    pub outputs: Vec<PathBuf>,
}

impl Summary<'_> {
    pub fn to_json(&self) -> Value {
        let c = self.config;
        json!({
            "experiment": self.experiment,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": c.seed,
            "wall_time_s": self.wall_time_s,
            "parameters": c,
            "results": self.results,
            "provenance": {
                "seed": c.seed,
                "window": { "t_max": c.t_max, "samples": c.samples },
                "j_prime_grid": c.j_prime_grid,
                "j_i_grid": c.j_i_grid,
                "krylov_tol": c.krylov_tol,
                "eigen_tol": c.eigen_tol,
                "dense_cap": c.dense_cap,
                "workers": c.workers,
                "units": { "energy": "J", "time": "hbar/J", "temperature": "J (k_B = 1)" },
            },
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.json", self.experiment));
        let mut text = serde_json::to_string_pretty(&self.to_json())?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_digits() {
        assert_eq!(sig10(0.0), "0");
        assert_eq!(sig10(0.05), "0.05000000000");
        assert_eq!(sig10(1.0), "1.000000000");
        assert_eq!(sig10(-0.7442), "-0.7442000000");
        assert_eq!(sig10(40.0), "40.00000000");
        assert_eq!(sig10(9.99999999999), "10.00000000");
        assert_eq!(sig10(1e-7), "1.000000000e-7");
        assert_eq!(sig10(std::f64::consts::PI), "3.141592654");
        assert_eq!(sig10(1234.5), "1234.500000");
    }

    #[test]
    fn csv_quoting() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![Cell::S("p, q".into()), Cell::I(3)]);
        assert_eq!(t.render(), "a,b\n\"p, q\",3\n");
    }
}
