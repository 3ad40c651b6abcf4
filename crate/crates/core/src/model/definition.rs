//! JSON model-definition files and the interpreted model built from them.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::{Expr, Node};
use super::{gate_jacobian_rows, CellModel, DerivedRule, ParamLayout, ParameterSet, Rates};
use crate::error::{Error, Result};

/// Half-width (mV) of the band around a removable singularity where the
/// value is taken from a two-term series.
pub const SERIES_BAND: f64 = 1e-4;
/// Half-width (mV) of the band where the derivative is taken from a series.
pub const DERIV_SERIES_BAND: f64 = 1e-2;

const MAX_ENV: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub expr: String,
    /// Voltages (mV) where numerator and denominator vanish together.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub singular: Vec<f64>,
}

impl RateSpec {
    pub fn new(expr: &str) -> Self {
        RateSpec { expr: expr.to_string(), singular: Vec::new() }
    }

    pub fn singular(expr: &str, at: &[f64]) -> Self {
        RateSpec { expr: expr.to_string(), singular: at.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GateKinetics {
    Rates { alpha: RateSpec, beta: RateSpec },
    SteadyTau { inf: RateSpec, tau: RateSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub name: String,
    #[serde(flatten)]
    pub kinetics: GateKinetics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentSpec {
    pub name: String,
    pub expr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conductance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reversal: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub value: f64,
    #[serde(default)]
    pub unit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedSpec {
    /// Target parameter; must also be declared under `parameters`.
    pub name: String,
    pub expr: String,
    #[serde(default = "yes")]
    pub enabled: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDefinition {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Membrane capacitance, µF/cm².
    pub capacitance: f64,
    pub states: Vec<String>,
    pub initial_state: Vec<f64>,
    pub parameters: Vec<ParameterSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derived: Vec<DerivedSpec>,
    pub gates: Vec<GateSpec>,
    pub currents: Vec<CurrentSpec>,
}

impl ModelDefinition {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("definition serializes")
    }

    /// Structural checks independent of expression compilation.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Definition(m));
        if self.states.first().map(String::as_str) != Some("V") {
            return bad("first state must be V".into());
        }
        if self.dim() != 1 + self.gates.len() {
            return bad(format!("{} states but {} gates", self.dim(), self.gates.len()));
        }
        for (s, g) in self.states[1..].iter().zip(&self.gates) {
            if *s != g.name {
                return bad(format!("state `{s}` does not match gate `{}`", g.name));
            }
        }
        if self.initial_state.len() != self.dim() {
            return bad(format!("initial_state has {} entries, expected {}", self.initial_state.len(), self.dim()));
        }
        if !(self.capacitance > 0.0) {
            return bad(format!("capacitance must be positive, got {}", self.capacitance));
        }
        let mut seen = std::collections::HashSet::new();
        for n in self.states.iter().chain(self.parameters.iter().map(|p| &p.name)) {
            if !seen.insert(n.as_str()) {
                return bad(format!("duplicate symbol `{n}`"));
            }
        }
        for d in &self.derived {
            if !self.parameters.iter().any(|p| p.name == d.name) {
                return bad(format!("derived parameter `{}` is not declared", d.name));
            }
        }
        Ok(())
    }
}

struct Singular {
    v0: f64,
    /// Taylor numerators N^(k)(v0), k = 1..4, as expressions of V.
    num: Vec<Node>,
    den: Vec<Node>,
}

struct RateFn {
    f: Node,
    df: Node,
    sing: Vec<Singular>,
}

impl RateFn {
    fn build(spec: &RateSpec, slot: &dyn Fn(&str) -> Option<usize>, what: &str) -> Result<RateFn> {
        let e = Expr::parse(&spec.expr)?;
        let none = HashMap::new();
        let de = e.diff("V", &none);
        let mut sing = Vec::new();
        for &v0 in &spec.singular {
            let (n, d) = match &e {
                Expr::Div(n, d) => ((**n).clone(), (**d).clone()),
                _ => {
                    return Err(Error::Definition(format!(
                        "{what}: singular points require a quotient at the top level"
                    )))
                }
            };
            let mut num = Vec::new();
            let mut den = Vec::new();
            let (mut nk, mut dk) = (n.clone(), d.clone());
            for _ in 0..4 {
                nk = nk.diff("V", &none);
                dk = dk.diff("V", &none);
                num.push(nk.compile(slot)?);
                den.push(dk.compile(slot)?);
            }
            let (nc, dc) = (n.compile(slot)?, d.compile(slot)?);
            let mut env = [0.0; MAX_ENV];
            env[0] = v0;
            // Parameters are not known here; the check is skipped if they appear.
            if n.variables().iter().chain(d.variables().iter()).all(|v| v == "V") {
                let scale = 1.0 + num[0].eval(&env).abs() + den[0].eval(&env).abs();
                if nc.eval(&env).abs() > 1e-9 * scale || dc.eval(&env).abs() > 1e-9 * scale {
                    return Err(Error::Definition(format!("{what}: {v0} is not a removable singularity")));
                }
            }
            sing.push(Singular { v0, num, den });
        }
        Ok(RateFn { f: e.compile(slot)?, df: de.compile(slot)?, sing })
    }

    /// Value and derivative with series branches near declared singularities.
    #[inline]
    fn eval(&self, env: &[f64], want_d: bool) -> (f64, f64) {
        let v = env[0];
        for s in &self.sing {
            let x = v - s.v0;
            if x.abs() < DERIV_SERIES_BAND {
                let c = s.coefficients(env);
                let val = if x.abs() < SERIES_BAND { c[0] + c[1] * x } else { self.f.eval(env) };
                let d = c[1] + x * (2.0 * c[2] + 3.0 * c[3] * x);
                return (val, d);
            }
        }
        let val = self.f.eval(env);
        let d = if want_d { self.df.eval(env) } else { 0.0 };
        (val, d)
    }
}

impl Singular {
    /// Taylor coefficients c0..c3 of N/D about v0 from those of N and D.
    fn coefficients(&self, env: &[f64]) -> [f64; 4] {
        let mut local = [0.0; MAX_ENV];
        local[..env.len()].copy_from_slice(env);
        local[0] = self.v0;
        let fact = [1.0, 2.0, 6.0, 24.0];
        let n: Vec<f64> = self.num.iter().zip(fact).map(|(e, f)| e.eval(&local) / f).collect();
        let d: Vec<f64> = self.den.iter().zip(fact).map(|(e, f)| e.eval(&local) / f).collect();
        let c0 = n[0] / d[0];
        let c1 = (n[1] - c0 * d[1]) / d[0];
        let c2 = (n[2] - c0 * d[2] - c1 * d[1]) / d[0];
        let c3 = (n[3] - c0 * d[3] - c1 * d[2] - c2 * d[1]) / d[0];
        [c0, c1, c2, c3]
    }
}

enum CompiledGate {
    Rates(RateFn, RateFn),
    SteadyTau(RateFn, RateFn),
}

impl CompiledGate {
    #[inline]
    fn rates(&self, env: &[f64], want_d: bool) -> Rates {
        match self {
            CompiledGate::Rates(a, b) => {
                let (a, da) = a.eval(env, want_d);
                let (b, db) = b.eval(env, want_d);
                Rates { a, b, da, db }
            }
            CompiledGate::SteadyTau(inf, tau) => {
                let (y, dy) = inf.eval(env, want_d);
                let (t, dt) = tau.eval(env, want_d);
                Rates {
                    a: y / t,
                    b: (1.0 - y) / t,
                    da: (dy * t - y * dt) / (t * t),
                    db: (-dy * t - (1.0 - y) * dt) / (t * t),
                }
            }
        }
    }
}

struct CompiledCurrent {
    f: Node,
}

/// A model interpreted from a [`ModelDefinition`].
pub struct ExprModel {
    def: ModelDefinition,
    layout: Arc<ParamLayout>,
    defaults: Vec<f64>,
    current_names: Vec<String>,
    gates: Vec<CompiledGate>,
    currents: Vec<CompiledCurrent>,
    /// d(sum I)/dV and d(sum I)/d(gate_j).
    grad_v: Node,
    grad_gate: Vec<Option<Node>>,
    ng: usize,
    np: usize,
}

impl ExprModel {
    pub fn from_json(text: &str) -> Result<ExprModel> {
        let def: ModelDefinition = serde_json::from_str(text)?;
        ExprModel::new(def)
    }

    pub fn new(def: ModelDefinition) -> Result<ExprModel> {
        def.validate()?;
        let ng = def.gates.len();
        let np = def.parameters.len();
        if 1 + 3 * ng + np > MAX_ENV {
            return Err(Error::Definition("model too large for the expression evaluator".into()));
        }
        let pnames: Vec<String> = def.parameters.iter().map(|p| p.name.clone()).collect();
        let gnames: Vec<String> = def.gates.iter().map(|g| g.name.clone()).collect();

        let param_slot = |n: &str| pnames.iter().position(|p| p == n);
        let rate_slot = |n: &str| -> Option<usize> {
            if n == "V" {
                Some(0)
            } else {
                param_slot(n).map(|i| 1 + ng + i)
            }
        };
        let full_slot = |n: &str| -> Option<usize> {
            if let Some(s) = rate_slot(n) {
                return Some(s);
            }
            if let Some(i) = gnames.iter().position(|g| g == n) {
                return Some(1 + i);
            }
            if let Some(g) = n.strip_suffix("_inf") {
                if let Some(i) = gnames.iter().position(|x| x == g) {
                    return Some(1 + ng + np + i);
                }
            }
            if let Some(g) = n.strip_suffix("_inf__dV") {
                if let Some(i) = gnames.iter().position(|x| x == g) {
                    return Some(1 + 2 * ng + np + i);
                }
            }
            None
        };

        let mut rules = Vec::new();
        for d in &def.derived {
            let e = Expr::parse(&d.expr)?;
            rules.push(DerivedRule {
                target: param_slot(&d.name).unwrap(),
                expr: e.compile(&param_slot).map_err(|e| Error::Definition(format!("derived {}: {e}", d.name)))?,
                enabled: d.enabled,
            });
        }
        let layout = Arc::new(ParamLayout {
            names: pnames.clone(),
            units: def.parameters.iter().map(|p| p.unit.clone()).collect(),
            rules,
        });
        let defaults: Vec<f64> = def.parameters.iter().map(|p| p.value).collect();

        let ctx = |what: String| move |e: Error| Error::Definition(format!("{what}: {e}"));
        let mut gates = Vec::new();
        for g in &def.gates {
            let build = |s: &RateSpec, tag: &str| {
                RateFn::build(s, &rate_slot, &format!("gate {} {tag}", g.name))
                    .map_err(ctx(format!("gate {} {tag}", g.name)))
            };
            gates.push(match &g.kinetics {
                GateKinetics::Rates { alpha, beta } => CompiledGate::Rates(build(alpha, "alpha")?, build(beta, "beta")?),
                GateKinetics::SteadyTau { inf, tau } => CompiledGate::SteadyTau(build(inf, "inf")?, build(tau, "tau")?),
            });
        }

        let mut chain = HashMap::new();
        for g in &gnames {
            chain.insert(format!("{g}_inf"), Expr::var(&format!("{g}_inf__dV")));
        }
        let mut currents = Vec::new();
        let mut total: Option<Expr> = None;
        for c in &def.currents {
            let e = Expr::parse(&c.expr).map_err(ctx(format!("current {}", c.name)))?;
            currents.push(CompiledCurrent { f: e.compile(&full_slot).map_err(ctx(format!("current {}", c.name)))? });
            total = Some(match total {
                None => e,
                Some(t) => Expr::Add(Box::new(t), Box::new(e)),
            });
        }
        let total = total.unwrap_or(Expr::num(0.0));
        let grad_v = total.diff("V", &chain).compile(&full_slot)?;
        let mut grad_gate = Vec::new();
        for g in &gnames {
            let d = total.diff(g, &HashMap::new());
            grad_gate.push(if d == Expr::num(0.0) { None } else { Some(d.compile(&full_slot)?) });
        }

        Ok(ExprModel {
            current_names: def.currents.iter().map(|c| c.name.clone()).collect(),
            def,
            layout,
            defaults,
            gates,
            currents,
            grad_v,
            grad_gate,
            ng,
            np,
        })
    }

    #[inline]
    fn fill_env(&self, state: &[f64], p: &ParameterSet, env: &mut [f64]) {
        env[..1 + self.ng].copy_from_slice(&state[..1 + self.ng]);
        env[1 + self.ng..1 + self.ng + self.np].copy_from_slice(p.values());
    }

    #[inline]
    fn fill_gates(&self, env: &mut [f64], rates: &mut [Rates], want_d: bool) {
        let base = 1 + self.ng + self.np;
        for (g, cg) in self.gates.iter().enumerate() {
            let r = cg.rates(env, want_d);
            env[base + g] = r.steady();
            if want_d {
                env[base + self.ng + g] = r.dsteady();
            }
            rates[g] = r;
        }
    }
}

const ZERO_RATES: Rates = Rates { a: 0.0, b: 0.0, da: 0.0, db: 0.0 };

impl CellModel for ExprModel {
    fn name(&self) -> &str {
        &self.def.name
    }

    fn state_names(&self) -> &[String] {
        &self.def.states
    }

    fn capacitance(&self) -> f64 {
        self.def.capacitance
    }

    fn default_params(&self) -> ParameterSet {
        ParameterSet::new(self.layout.clone(), self.defaults.clone())
    }

    fn default_state(&self) -> Vec<f64> {
        self.def.initial_state.clone()
    }

    fn current_names(&self) -> &[String] {
        &self.current_names
    }

    fn rates(&self, gate: usize, v: f64, p: &ParameterSet) -> Rates {
        let mut env = [0.0; MAX_ENV];
        env[0] = v;
        env[1 + self.ng..1 + self.ng + self.np].copy_from_slice(p.values());
        self.gates[gate].rates(&env, true)
    }

    fn eval_currents(&self, state: &[f64], p: &ParameterSet, out: &mut [f64]) {
        let mut env = [0.0; MAX_ENV];
        let mut rates = [ZERO_RATES; MAX_ENV / 3];
        self.fill_env(state, p, &mut env);
        self.fill_gates(&mut env, &mut rates, false);
        for (o, c) in out.iter_mut().zip(&self.currents) {
            *o = c.f.eval(&env);
        }
    }

    fn eval_rhs(&self, state: &[f64], p: &ParameterSet, i_stim: f64, out: &mut [f64]) {
        let mut env = [0.0; MAX_ENV];
        let mut rates = [ZERO_RATES; MAX_ENV / 3];
        self.fill_env(state, p, &mut env);
        self.fill_gates(&mut env, &mut rates, false);
        let mut total = 0.0;
        for c in &self.currents {
            total += c.f.eval(&env);
        }
        out[0] = -(total - i_stim) / self.def.capacitance;
        for g in 0..self.ng {
            out[g + 1] = rates[g].rhs(state[g + 1]);
        }
    }

    fn eval_jacobian(&self, state: &[f64], p: &ParameterSet, jac: &mut [f64]) {
        let n = self.ng + 1;
        let mut env = [0.0; MAX_ENV];
        let mut rates = [ZERO_RATES; MAX_ENV / 3];
        self.fill_env(state, p, &mut env);
        self.fill_gates(&mut env, &mut rates, true);
        let cm = self.def.capacitance;
        jac[0] = -self.grad_v.eval(&env) / cm;
        for (g, d) in self.grad_gate.iter().enumerate() {
            jac[g + 1] = match d {
                Some(d) => -d.eval(&env) / cm,
                None => 0.0,
            };
        }
        gate_jacobian_rows(&rates[..self.ng], state, &mut jac[..n * n]);
    }

    fn definition(&self) -> ModelDefinition {
        self.def.clone()
    }
}
