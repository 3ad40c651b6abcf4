//! Cell models: parameter sets, the model trait and shared gate algebra.

pub mod bernus;
pub mod definition;
pub mod expr;
pub mod noble;

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
pub use definition::{ExprModel, ModelDefinition};
pub use noble::Noble;

/// Gate rate coefficients `a`, `b` (1/ms) and their voltage derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub a: f64,
    pub b: f64,
    pub da: f64,
    pub db: f64,
}

impl Rates {
    #[inline]
    pub fn steady(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        1.0 / (self.a + self.b)
    }

    /// Derivative of the steady state with respect to V.
    #[inline]
    pub fn dsteady(&self) -> f64 {
        let s = self.a + self.b;
        (self.da * self.b - self.a * self.db) / (s * s)
    }

    /// Gate right-hand side `(y_inf - y) / tau`.
    #[inline]
    pub fn rhs(&self, y: f64) -> f64 {
        (self.steady() - y) / self.tau()
    }

    /// Partial derivative of the gate right-hand side with respect to V.
    #[inline]
    pub fn rhs_dv(&self, y: f64) -> f64 {
        let s = self.a + self.b;
        self.dsteady() * s + (self.steady() - y) * (self.da + self.db)
    }
}

/// Rule computing one parameter from others (for example a Nernst potential).
#[derive(Clone, Debug)]
pub struct DerivedRule {
    pub target: usize,
    pub expr: expr::Node,
    pub enabled: bool,
}

#[derive(Debug)]
pub struct ParamLayout {
    pub names: Vec<String>,
    pub units: Vec<String>,
    pub rules: Vec<DerivedRule>,
}

/// Named parameter values. Cheap to clone; the layout is shared.
#[derive(Clone, Debug)]
pub struct ParameterSet {
    layout: Arc<ParamLayout>,
    values: Vec<f64>,
    rule_on: Vec<bool>,
}

fn normalize(name: &str) -> String {
    name.chars().filter(|c| *c != '_' && *c != '-').flat_map(char::to_lowercase).collect()
}

impl ParameterSet {
    pub fn new(layout: Arc<ParamLayout>, values: Vec<f64>) -> Self {
        let rule_on = layout.rules.iter().map(|r| r.enabled).collect();
        let mut p = ParameterSet { layout, values, rule_on };
        p.refresh();
        p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.layout.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self, idx: usize) -> &str {
        &self.layout.units[idx]
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    /// Look up a parameter by exact name, falling back to a
    /// case- and underscore-insensitive match (`GL` finds `G_L`).
    pub fn index_of(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.layout.names.iter().position(|n| n == name) {
            return Some(i);
        }
        let key = normalize(name);
        self.layout.names.iter().position(|n| normalize(n) == key)
    }

    pub fn resolve(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownParameter {
            name: name.to_string(),
            valid: self.layout.names.join(", "),
        })
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.values[self.resolve(name)?])
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Set a value. Setting a derived parameter pins it (disables its rule).
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self.resolve(name)?;
        self.set_at(i, value);
        Ok(())
    }

    pub fn set_at(&mut self, idx: usize, value: f64) {
        for (k, r) in self.layout.rules.iter().enumerate() {
            if r.target == idx {
                self.rule_on[k] = false;
            }
        }
        self.values[idx] = value;
        self.refresh();
    }

    /// Enable or disable the derivation rule for `name`.
    pub fn set_derived(&mut self, name: &str, on: bool) -> Result<()> {
        let i = self.resolve(name)?;
        let mut found = false;
        for (k, r) in self.layout.rules.iter().enumerate() {
            if r.target == i {
                self.rule_on[k] = on;
                found = true;
            }
        }
        if !found {
            return Err(Error::Config(format!("parameter `{name}` has no derivation rule")));
        }
        self.refresh();
        Ok(())
    }

    pub fn is_derived(&self, idx: usize) -> bool {
        self.layout.rules.iter().zip(&self.rule_on).any(|(r, on)| *on && r.target == idx)
    }

    fn refresh(&mut self) {
        for (r, on) in self.layout.rules.iter().zip(&self.rule_on) {
            if *on {
                self.values[r.target] = r.expr.eval(&self.values);
            }
        }
    }

    /// Conductances (`G_*`) must be non-negative and block fractions (`block*`) in [0, 1].
    pub fn validate(&self) -> Result<()> {
        for (n, v) in self.layout.names.iter().zip(&self.values) {
            if !v.is_finite() {
                return Err(Error::Config(format!("parameter {n} is not finite")));
            }
            if n.starts_with("G_") && *v < 0.0 {
                return Err(Error::Config(format!("conductance {n} = {v} is negative")));
            }
            if n.starts_with("block") && !(0.0..=1.0).contains(v) {
                return Err(Error::Config(format!("block fraction {n} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, f64)> {
        self.layout.names.iter().cloned().zip(self.values.iter().copied()).collect()
    }
}

/// A single-cell membrane model `C_m dV/dt = -(sum I - I_stim)`, gates `dy/dt = (y_inf - y)/tau`.
pub trait CellModel: Send + Sync {
    fn name(&self) -> &str;
    /// State labels: `V` followed by the gates.
    fn state_names(&self) -> &[String];
    fn dim(&self) -> usize {
        self.state_names().len()
    }
    fn gate_count(&self) -> usize {
        self.dim() - 1
    }
    fn capacitance(&self) -> f64;
    fn default_params(&self) -> ParameterSet;
    fn default_state(&self) -> Vec<f64>;
    fn current_names(&self) -> &[String];
    /// Rate coefficients of gate `gate` (0-based among gates).
    fn rates(&self, gate: usize, v: f64, p: &ParameterSet) -> Rates;
    /// Individual currents, in declared order.
    fn eval_currents(&self, state: &[f64], p: &ParameterSet, out: &mut [f64]);
    /// Right-hand side into `out`. No dimension checks.
    fn eval_rhs(&self, state: &[f64], p: &ParameterSet, i_stim: f64, out: &mut [f64]);
    /// Row-major dim x dim Jacobian into `jac`. No dimension checks.
    fn eval_jacobian(&self, state: &[f64], p: &ParameterSet, jac: &mut [f64]);
    /// Serializable definition of this model.
    fn definition(&self) -> ModelDefinition;
}

pub type SharedModel = Arc<dyn CellModel>;

fn gate_index(model: &dyn CellModel, gate: &str) -> Result<usize> {
    model.state_names()[1..]
        .iter()
        .position(|g| g == gate)
        .ok_or_else(|| Error::Definition(format!("unknown gate `{gate}` in model {}", model.name())))
}

fn check_state(model: &dyn CellModel, state: &[f64], p: &ParameterSet) -> Result<()> {
    if state.len() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: state.len() });
    }
    let np = model.default_params().len();
    if p.len() != np {
        return Err(Error::Dimension { expected: np, got: p.len() });
    }
    Ok(())
}

/// Rate coefficients `(a, b)` of a named gate.
pub fn rate_coeffs(model: &dyn CellModel, gate: &str, v: f64, p: &ParameterSet) -> Result<(f64, f64)> {
    let r = model.rates(gate_index(model, gate)?, v, p);
    Ok((r.a, r.b))
}

/// Steady state and time constant `(y_inf, tau)` of a named gate.
pub fn gate_steady(model: &dyn CellModel, gate: &str, v: f64, p: &ParameterSet) -> Result<(f64, f64)> {
    let r = model.rates(gate_index(model, gate)?, v, p);
    Ok((r.steady(), r.tau()))
}

pub fn rhs(model: &dyn CellModel, state: &[f64], p: &ParameterSet, i_stim: f64) -> Result<Vec<f64>> {
    check_state(model, state, p)?;
    let mut out = vec![0.0; state.len()];
    model.eval_rhs(state, p, i_stim, &mut out);
    Ok(out)
}

pub fn currents(model: &dyn CellModel, state: &[f64], p: &ParameterSet) -> Result<Vec<(String, f64)>> {
    check_state(model, state, p)?;
    let mut out = vec![0.0; model.current_names().len()];
    model.eval_currents(state, p, &mut out);
    Ok(model.current_names().iter().cloned().zip(out).collect())
}

pub fn analytic_jacobian(model: &dyn CellModel, state: &[f64], p: &ParameterSet) -> Result<DMatrix<f64>> {
    check_state(model, state, p)?;
    let n = state.len();
    let mut buf = vec![0.0; n * n];
    model.eval_jacobian(state, p, &mut buf);
    Ok(DMatrix::from_row_slice(n, n, &buf))
}

/// State with every gate at its steady state for voltage `v`.
pub fn steady_state_at(model: &dyn CellModel, v: f64, p: &ParameterSet) -> Vec<f64> {
    let mut s = Vec::with_capacity(model.dim());
    s.push(v);
    for g in 0..model.gate_count() {
        s.push(model.rates(g, v, p).steady());
    }
    s
}

/// Fill the gate rows of a row-major Jacobian. Shared by all models.
pub(crate) fn gate_jacobian_rows(rates: &[Rates], state: &[f64], jac: &mut [f64]) {
    let n = state.len();
    for (g, r) in rates.iter().enumerate() {
        let row = g + 1;
        for c in 0..n {
            jac[row * n + c] = 0.0;
        }
        jac[row * n] = r.rhs_dv(state[row]);
        jac[row * n + row] = -(r.a + r.b);
    }
}

/// Load a model by name (`noble`, `noble-json`, `bernus`) or from a JSON file path.
pub fn load_model(spec: &str) -> Result<SharedModel> {
    match spec {
        "noble" => Ok(Arc::new(Noble::new())),
        "noble-json" => Ok(Arc::new(ExprModel::from_json(noble::NOBLE_JSON)?)),
        "bernus" => Ok(Arc::new(bernus::bernus()?)),
        path => {
            let p = Path::new(path);
            if !p.exists() {
                return Err(Error::NotFound(format!(
                    "model `{path}` (builtin models: noble, noble-json, bernus)"
                )));
            }
            let text = std::fs::read_to_string(p)?;
            Ok(Arc::new(ExprModel::from_json(&text)?))
        }
    }
}

/// Source text of a model for hashing into run manifests.
pub fn model_source(spec: &str) -> Result<String> {
    match spec {
        "noble" | "noble-json" => Ok(noble::NOBLE_JSON.to_string()),
        "bernus" => Ok(bernus::BERNUS_JSON.to_string()),
        path => Ok(std::fs::read_to_string(path)?),
    }
}
