use serde::Serialize;

use super::ExperimentOptions;
use crate::eigensolve::energy_gap;
use crate::entanglement::entanglement_from_pmax;
use crate::error::{Error, Result};
use crate::hamiltonian::ModuleSpec;

/// Weak-impurity limit: each module reduces to an effective impurity pair
/// with coupling `gap / 4`, and the quench bond is tuned to their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbativePrediction {
    pub gap_l: f64,
    pub gap_r: f64,
    pub j_eff_l: f64,
    pub j_eff_r: f64,
    /// `j_eff_l + j_eff_r`, in units of J.
    pub j_i_star: f64,
    /// `pi / (4 j_i_star)`, in hbar/J.
    pub t_opt_pred: f64,
}

impl PerturbativePrediction {
    /// Singlet weight `(5 - 3 cos(4 J_I t)) / 8` at `J_I = j_i_star`.
    pub fn singlet_weight(&self, t: f64) -> f64 {
        (5.0 - 3.0 * (4.0 * self.j_i_star * t).cos()) / 8.0
    }

    /// Predicted entanglement, zero while the singlet weight is at most 1/2.
    pub fn entanglement(&self, t: f64) -> f64 {
        entanglement_from_pmax(self.singlet_weight(t))
    }
}

pub fn perturbative_prediction(
    left: &ModuleSpec,
    right: &ModuleSpec,
    opts: &ExperimentOptions,
) -> Result<PerturbativePrediction> {
    let gl = energy_gap(left, &opts.eigen)?;
    let gr = energy_gap(right, &opts.eigen)?;
    for g in [&gl, &gr] {
        if g.degenerate {
            return Err(Error::DegenerateGround { gap: g.delta });
        }
    }
    let j_eff_l = gl.delta / 4.0;
    let j_eff_r = gr.delta / 4.0;
    let j_i_star = j_eff_l + j_eff_r;
    Ok(PerturbativePrediction {
        gap_l: gl.delta,
        gap_r: gr.delta,
        j_eff_l,
        j_eff_r,
        j_i_star,
        t_opt_pred: std::f64::consts::PI / (4.0 * j_i_star),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(j: f64) -> PerturbativePrediction {
        PerturbativePrediction {
            gap_l: 2.0 * j,
            gap_r: 2.0 * j,
            j_eff_l: j / 2.0,
            j_eff_r: j / 2.0,
            j_i_star: j,
            t_opt_pred: std::f64::consts::PI / (4.0 * j),
        }
    }

    #[test]
    fn closed_form_landmarks() {
        let p = fixed(0.3);
        assert!((p.singlet_weight(p.t_opt_pred) - 1.0).abs() < 1e-14);
        assert!((p.entanglement(p.t_opt_pred) - 1.0).abs() < 1e-12);
        assert!((p.singlet_weight(0.0) - 0.25).abs() < 1e-15);
        assert_eq!(p.entanglement(0.0), 0.0);
        let t = std::f64::consts::FRAC_PI_2 / (4.0 * p.j_i_star);
        assert!((p.singlet_weight(t) - 0.625).abs() < 1e-14);
        assert!((p.entanglement(t) - 0.045565997075035).abs() < 1e-12);
    }
}
