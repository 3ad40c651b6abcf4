//! Bundled ventricular model (V, m, v, d, f, r, to, x_r, x_s, K1).

use super::definition::ExprModel;
use crate::error::Result;

pub const BERNUS_JSON: &str = include_str!("../../assets/bernus.json");

/// Standard initial state.
pub const REST_STATE: [f64; 10] = [-93.3701, 0.0004, 0.999, 0.0, 0.8797, 0.0, 0.9999, 0.0042, 0.0912, 0.0419];
/// Initial state in the basin of the self-oscillating / chaotic attractor.
pub const CHAOTIC_STATE: [f64; 10] = [0.7589, 0.9952, 0.0, 0.9141, 0.134, 0.0411, 0.0028, 0.9745, 0.5485, 0.0];

/// Default stimulus amplitude (µA/cm²) and duration (ms).
pub const STIM_AMPLITUDE: f64 = 40.0;
pub const STIM_DURATION: f64 = 2.0;

pub fn bernus() -> Result<ExprModel> {
    ExprModel::from_json(BERNUS_JSON)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{currents, rhs, CellModel};

    #[test]
    fn loads_with_ten_states() {
        let m = bernus().unwrap();
        assert_eq!(m.dim(), 10);
        assert_eq!(m.capacitance(), 1.534);
        assert_eq!(m.default_state(), REST_STATE.to_vec());
    }

    #[test]
    fn derived_potentials_follow_concentrations() {
        let m = bernus().unwrap();
        let mut p = m.default_params();
        let ek = p.get("E_K").unwrap();
        assert!((ek - (8314.472 * 310.0 / 96485.3415) * (4.0f64 / 140.0).ln()).abs() < 1e-12);
        p.set("K_o", 5.4).unwrap();
        assert!(p.get("E_K").unwrap() > ek);
        // E_Ca is fixed unless the Nernst rule is switched on
        let eca = p.get("E_Ca").unwrap();
        p.set("Ca_i", 0.0001).unwrap();
        assert_eq!(p.get("E_Ca").unwrap(), eca);
        p.set_derived("E_Ca", true).unwrap();
        assert!(p.get("E_Ca").unwrap() > eca);
        // pinning a derived value disables its rule
        p.set("E_K", -90.0).unwrap();
        p.set("K_o", 4.0).unwrap();
        assert_eq!(p.get("E_K").unwrap(), -90.0);
    }

    #[test]
    fn currents_decompose_rhs() {
        let m = bernus().unwrap();
        let p = m.default_params();
        let s = REST_STATE;
        let c = currents(&m, &s, &p).unwrap();
        let total: f64 = c.iter().map(|(_, i)| i).sum();
        let d = rhs(&m, &s, &p, 5.0).unwrap();
        assert!((d[0] * 1.534 + total - 5.0).abs() < 1e-12);
    }

    #[test]
    fn block_scales_ikr() {
        let m = bernus().unwrap();
        let mut p = m.default_params();
        let s = [-10.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
        let ikr = |p: &crate::model::ParameterSet| currents(&m, &s, p).unwrap()[4].1;
        let full = ikr(&p);
        p.set("block_IKr", 0.8).unwrap();
        assert!((ikr(&p) - 0.2 * full).abs() < 1e-15);
    }
}
