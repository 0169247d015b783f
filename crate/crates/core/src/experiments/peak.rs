use serde::{Deserialize, Serialize};

use super::TraceSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakResult {
    pub t_opt: f64,
    pub e_max: f64,
    /// Grid index of the raw maximum.
    pub index: usize,
    pub refined: bool,
    /// The maximum sits on the last sample, so the true peak may lie beyond
    /// the window.
    pub window_truncated: bool,
}

/// Which maximum of `E(t)` counts as the peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakRule {
    /// Largest sample over the whole window, earliest on ties.
    Global,
    /// First local maximum with a positive value; the global maximum when
    /// the trace never turns over.
    #[default]
    First,
}

impl std::str::FromStr for PeakRule {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "first" => Ok(Self::First),
            _ => Err(crate::error::Error::domain(format!("unknown peak rule {s:?}, expected global or first"))),
        }
    }
}

pub fn find_peak(trace: &TraceSeries) -> PeakResult {
    find_peak_in(&trace.times, &trace.e, true)
}

/// Global maximum of `values` sampled at `times`, earliest on ties, with an
/// optional 3-point parabola through an interior maximum.
pub fn find_peak_in(times: &[f64], values: &[f64], refine: bool) -> PeakResult {
    find_peak_with(times, values, refine, PeakRule::Global)
}

pub fn find_peak_with(times: &[f64], values: &[f64], refine: bool, rule: PeakRule) -> PeakResult {
    assert!(!times.is_empty() && times.len() == values.len(), "peak of an empty or ragged trace");
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    if rule == PeakRule::First {
        let first = (1..values.len().saturating_sub(1))
            .find(|&i| values[i] > 0.0 && values[i] >= values[i - 1] && values[i] > values[i + 1]);
        if let Some(i) = first {
            // walk back over a flat top so ties keep the earliest sample
            let mut j = i;
            while j > 0 && values[j - 1] == values[i] {
                j -= 1;
            }
            best = j;
        }
    }
    let last = values.len() - 1;
    let mut out = PeakResult {
        t_opt: times[best],
        e_max: values[best],
        index: best,
        refined: false,
        window_truncated: best == last && last > 0,
    };
    if refine && best > 0 && best < last {
        if let Some((t, v)) = parabola_vertex(
            (times[best - 1], values[best - 1]),
            (times[best], values[best]),
            (times[best + 1], values[best + 1]),
        ) {
            if t >= times[best - 1] && t <= times[best + 1] && v >= values[best] {
                out.t_opt = t;
                out.e_max = v.min(1.0);
                out.refined = true;
            }
        }
    }
    out
}

/// Vertex of the parabola through three points, if it opens downward.
fn parabola_vertex(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<(f64, f64)> {
    let (x0, y0) = a;
    let (x1, y1) = b;
    let (x2, y2) = c;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if !(curv < 0.0) {
        return None;
    }
    // Newton form: y = y0 + d01 (x - x0) + curv (x - x0)(x - x1)
    let t = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
    let v = y0 + d01 * (t - x0) + curv * (t - x0) * (t - x1);
    Some((t, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace_picks_first() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let p = find_peak_in(&t, &[0.5; 4], true);
        assert_eq!(p.index, 0);
        assert_eq!(p.t_opt, 0.0);
        assert!(!p.window_truncated && !p.refined);
    }

    #[test]
    fn sine_squared_peak() {
        let t: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let v: Vec<f64> = t.iter().map(|x| x.sin().powi(2)).collect();
        let p = find_peak_in(&t, &v, true);
        assert!(p.refined);
        assert!((p.t_opt - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
        assert!((p.e_max - 1.0).abs() < 1e-5);
        assert!(!p.window_truncated);
    }

    #[test]
    fn rising_trace_is_truncated() {
        let t = [0.0, 1.0, 2.0];
        let p = find_peak_in(&t, &[0.1, 0.2, 0.3], true);
        assert_eq!(p.index, 2);
        assert!(p.window_truncated && !p.refined);
    }

    #[test]
    fn first_rule_stops_at_the_first_turn() {
        let t: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let v = [0.0, 0.0, 0.3, 0.5, 0.4, 0.2, 0.9, 0.1];
        assert_eq!(find_peak_with(&t, &v, false, PeakRule::First).index, 3);
        assert_eq!(find_peak_with(&t, &v, false, PeakRule::Global).index, 6);
        let rising = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let p = find_peak_with(&t, &rising, false, PeakRule::First);
        assert!(p.window_truncated && p.index == 7);
        let flat = [0.0, 0.4, 0.4, 0.4, 0.1, 0.0, 0.0, 0.0];
        assert_eq!(find_peak_with(&t, &flat, false, PeakRule::First).index, 1);
    }

    #[test]
    fn parabola_exact_for_quadratics() {
        let f = |x: f64| 2.0 - 3.0 * (x - 0.37).powi(2);
        let (t, v) = parabola_vertex((0.0, f(0.0)), (0.5, f(0.5)), (1.5, f(1.5))).unwrap();
        assert!((t - 0.37).abs() < 1e-12 && (v - 2.0).abs() < 1e-12);
        assert!(parabola_vertex((0.0, 0.0), (1.0, 1.0), (2.0, 2.0)).is_none());
    }
}
