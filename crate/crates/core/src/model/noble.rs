//! Hand-written Noble (1962) Purkinje fibre model.

use std::sync::{Arc, OnceLock};

use super::expr::ipow;
use super::{gate_jacobian_rows, CellModel, ModelDefinition, ParamLayout, ParameterSet, Rates};

pub const NOBLE_JSON: &str = include_str!("../../assets/noble.json");

pub const G_NA: usize = 0;
pub const G_K1: usize = 1;
pub const G_K2: usize = 2;
pub const G_L: usize = 3;
pub const E_NA: usize = 4;
pub const E_K: usize = 5;
pub const E_L: usize = 6;

const CM: f64 = 12.0;

/// Resting initial state (V, h, m, n).
pub const REST_STATE: [f64; 4] = [-79.04, 0.81, 0.045, 0.52];
/// Initial state inside the chaotic regime at G_L = 0.1845.
pub const CHAOTIC_STATE: [f64; 4] = [-40.8454, 0.0268, 0.3233, 0.5852];

pub struct Noble {
    states: Vec<String>,
    currents: Vec<String>,
    layout: Arc<ParamLayout>,
}

impl Default for Noble {
    fn default() -> Self {
        Self::new()
    }
}

fn shared_layout() -> Arc<ParamLayout> {
    static LAYOUT: OnceLock<Arc<ParamLayout>> = OnceLock::new();
    LAYOUT
        .get_or_init(|| {
            let names = ["G_Na", "G_K1", "G_K2", "G_L", "E_Na", "E_K", "E_L"];
            let units = ["mS/cm^2", "mS/cm^2", "mS/cm^2", "mS/cm^2", "mV", "mV", "mV"];
            Arc::new(ParamLayout {
                names: names.iter().map(|s| s.to_string()).collect(),
                units: units.iter().map(|s| s.to_string()).collect(),
                rules: Vec::new(),
            })
        })
        .clone()
}

/// x / (1 - e^-x) and its derivative, valid for small |x|.
#[inline]
fn g_series(x: f64) -> (f64, f64) {
    (1.0 + 0.5 * x, 0.5 + x / 6.0 - x * x * x / 180.0)
}

const BAND: f64 = super::definition::SERIES_BAND;
const DBAND: f64 = super::definition::DERIV_SERIES_BAND;

#[inline]
fn a_h(v: f64) -> (f64, f64) {
    let a = 0.17 * (-(v + 90.0) / 20.0).exp();
    (a, -a / 20.0)
}

#[inline]
fn b_h(v: f64) -> (f64, f64) {
    let e = (-(v + 42.0) / 10.0).exp();
    let b = 1.0 / (1.0 + e);
    (b, b * b * e / 10.0)
}

#[inline]
fn a_m(v: f64) -> (f64, f64) {
    let u = v + 48.0;
    if u.abs() < DBAND {
        let x = u / 15.0;
        let d = 0.1 * g_series(x).1;
        let a = if u.abs() < BAND { 1.5 + 0.05 * u } else { 0.1 * (v + 48.0) / (1.0 - (-(v + 48.0) / 15.0).exp()) };
        return (a, d);
    }
    let e = (-u / 15.0).exp();
    let den = 1.0 - e;
    let a = 0.1 * (v + 48.0) / (1.0 - (-(v + 48.0) / 15.0).exp());
    (a, 0.1 / den - 0.1 * u * e / (15.0 * den * den))
}

#[inline]
fn b_m(v: f64) -> (f64, f64) {
    let u = v + 8.0;
    if u.abs() < DBAND {
        // 0.12 u / (e^{u/5} - 1) = 0.6 g(-u/5)
        let x = -u / 5.0;
        let d = -0.12 * g_series(x).1;
        let b = if u.abs() < BAND { 0.6 - 0.06 * u } else { 0.12 * (v + 8.0) / (((v + 8.0) / 5.0).exp() - 1.0) };
        return (b, d);
    }
    let e = (u / 5.0).exp();
    let den = e - 1.0;
    let b = 0.12 * (v + 8.0) / (((v + 8.0) / 5.0).exp() - 1.0);
    (b, 0.12 / den - 0.12 * u * e / (5.0 * den * den))
}

#[inline]
fn a_n(v: f64) -> (f64, f64) {
    let u = v + 50.0;
    if u.abs() < DBAND {
        let x = u / 10.0;
        let d = 0.0001 * g_series(x).1;
        let a = if u.abs() < BAND {
            0.001 + 0.00005 * u
        } else {
            0.0001 * (v + 50.0) / (1.0 - (-(v + 50.0) / 10.0).exp())
        };
        return (a, d);
    }
    let e = (-u / 10.0).exp();
    let den = 1.0 - e;
    let a = 0.0001 * (v + 50.0) / (1.0 - (-(v + 50.0) / 10.0).exp());
    (a, 0.0001 / den - 0.0001 * u * e / (10.0 * den * den))
}

#[inline]
fn b_n(v: f64) -> (f64, f64) {
    let b = 0.002 * (-(v + 90.0) / 80.0).exp();
    (b, -b / 80.0)
}

#[inline]
fn all_rates(v: f64) -> [Rates; 3] {
    let mk = |(a, da): (f64, f64), (b, db): (f64, f64)| Rates { a, b, da, db };
    [mk(a_h(v), b_h(v)), mk(a_m(v), b_m(v)), mk(a_n(v), b_n(v))]
}

#[inline]
fn currents3(s: &[f64], p: &[f64]) -> [f64; 3] {
    let (v, h, m, n) = (s[0], s[1], s[2], s[3]);
    let i_na = (p[G_NA] * ipow(m, 3) * h + 0.14) * (v - p[E_NA]);
    let i_k = (p[G_K1] * ipow(n, 4) + p[G_K2] * (-(v + 90.0) / 50.0).exp() + p[G_K2] / 80.0 * ((v + 90.0) / 60.0).exp())
        * (v - p[E_K]);
    let i_l = p[G_L] * (v - p[E_L]);
    [i_na, i_k, i_l]
}

impl Noble {
    pub fn new() -> Self {
        Noble {
            states: ["V", "h", "m", "n"].iter().map(|s| s.to_string()).collect(),
            currents: ["I_Na", "I_K", "I_L"].iter().map(|s| s.to_string()).collect(),
            layout: shared_layout(),
        }
    }
}

impl CellModel for Noble {
    fn name(&self) -> &str {
        "noble"
    }

    fn state_names(&self) -> &[String] {
        &self.states
    }

    fn capacitance(&self) -> f64 {
        CM
    }

    fn default_params(&self) -> ParameterSet {
        ParameterSet::new(self.layout.clone(), vec![400.0, 1.2, 1.2, 0.075, 40.0, -100.0, -60.0])
    }

    fn default_state(&self) -> Vec<f64> {
        REST_STATE.to_vec()
    }

    fn current_names(&self) -> &[String] {
        &self.currents
    }

    fn rates(&self, gate: usize, v: f64, _p: &ParameterSet) -> Rates {
        all_rates(v)[gate]
    }

    fn eval_currents(&self, state: &[f64], p: &ParameterSet, out: &mut [f64]) {
        out[..3].copy_from_slice(&currents3(state, p.values()));
    }

    fn eval_rhs(&self, state: &[f64], p: &ParameterSet, i_stim: f64, out: &mut [f64]) {
        let c = currents3(state, p.values());
        let mut total = 0.0;
        for i in c {
            total += i;
        }
        out[0] = -(total - i_stim) / CM;
        let r = all_rates(state[0]);
        for g in 0..3 {
            out[g + 1] = r[g].rhs(state[g + 1]);
        }
    }

    fn eval_jacobian(&self, state: &[f64], p: &ParameterSet, jac: &mut [f64]) {
        let p = p.values();
        let (v, h, m, n) = (state[0], state[1], state[2], state[3]);
        let ek = (-(v + 90.0) / 50.0).exp();
        let ep = ((v + 90.0) / 60.0).exp();
        let g_na = p[G_NA] * m * m * m * h + 0.14;
        let g_k = p[G_K1] * n * n * n * n + p[G_K2] * ek + p[G_K2] / 80.0 * ep;
        let dgk_dv = -p[G_K2] * ek / 50.0 + p[G_K2] / 4800.0 * ep;
        let di_dv = g_na + g_k + dgk_dv * (v - p[E_K]) + p[G_L];
        let di_dh = p[G_NA] * m * m * m * (v - p[E_NA]);
        let di_dm = 3.0 * p[G_NA] * m * m * h * (v - p[E_NA]);
        let di_dn = 4.0 * p[G_K1] * n * n * n * (v - p[E_K]);
        jac[0] = -di_dv / CM;
        jac[1] = -di_dh / CM;
        jac[2] = -di_dm / CM;
        jac[3] = -di_dn / CM;
        gate_jacobian_rows(&all_rates(v), state, jac);
    }

    fn definition(&self) -> ModelDefinition {
        serde_json::from_str(NOBLE_JSON).expect("bundled Noble definition parses")
    }
}
