//! Python bindings. Structured results come back as plain dicts and lists.

use std::collections::HashMap;

use cardiobif::cable;
use cardiobif::continuation::{continue_from_rest, ContinuationSettings};
use cardiobif::diagnostics::{ap_metrics, largest_lyapunov, regime, EadSettings, LyapunovSettings, PeriodSettings, RunMetrics};
use cardiobif::equilibria::{find_all_equilibria, find_rest, DEFAULT_RANGE};
use cardiobif::integrator::{simulate as integrate, Sampling, SimOptions, SolverConfig, StimulusProtocol};
use cardiobif::model::{load_model, CellModel, ParameterSet, SharedModel};
use cardiobif::Error;
use pyo3::exceptions::{PyLookupError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::{json, Value};

fn err(e: Error) -> PyErr {
    match &e {
        Error::NotFound(_) => PyLookupError::new_err(e.to_string()),
        _ if e.is_numerical() => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (v.to_string(),))?.unbind())
}

fn setup(model: &str, params: Option<HashMap<String, f64>>) -> PyResult<(SharedModel, ParameterSet)> {
    let m = load_model(model).map_err(err)?;
    let mut p = m.default_params();
    for (k, v) in params.unwrap_or_default() {
        p.set(&k, v).map_err(err)?;
    }
    p.validate().map_err(err)?;
    Ok((m, p))
}

fn initial(m: &dyn CellModel, ic: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let x = ic.unwrap_or_else(|| m.default_state());
    if x.len() != m.dim() {
        return Err(err(Error::Dimension { expected: m.dim(), got: x.len() }));
    }
    Ok(x)
}

/// Single pulse at t = 0 unless a period is given.
fn pulse(amplitude: f64, duration: f64, period: Option<f64>) -> StimulusProtocol {
    if amplitude == 0.0 {
        return StimulusProtocol::none();
    }
    match period {
        Some(t) => StimulusProtocol::periodic(amplitude, 0.0, duration, t),
        None => StimulusProtocol { amplitude, start: 0.0, duration, period: None, count: Some(1) },
    }
}

#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Default parameters of a model as (name, value) pairs.
#[pyfunction]
fn parameters(model: &str) -> PyResult<Vec<(String, f64)>> {
    Ok(setup(model, None)?.1.to_pairs())
}

/// State names of a model, V first.
#[pyfunction]
fn state_names(model: &str) -> PyResult<Vec<String>> {
    Ok(load_model(model).map_err(err)?.state_names().to_vec())
}

/// Integrate one cell; returns (times, states) sampled every `dt` ms.
#[pyfunction]
#[pyo3(signature = (model, t_end, params=None, ic=None, dt=1.0, stim_amplitude=0.0, stim_duration=2.0, stim_period=None))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    model: &str,
    t_end: f64,
    params: Option<HashMap<String, f64>>,
    ic: Option<Vec<f64>>,
    dt: f64,
    stim_amplitude: f64,
    stim_duration: f64,
    stim_period: Option<f64>,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let (m, p) = setup(model, params)?;
    let x0 = initial(&*m, ic)?;
    let stim = pulse(stim_amplitude, stim_duration, stim_period);
    let opts = SimOptions { sampling: Sampling::Uniform(dt), keep_dense: false };
    let tr = py
        .detach(|| integrate(&*m, &p, &x0, 0.0, t_end, &stim, &SolverConfig::default(), &opts))
        .map_err(err)?;
    let rows = (0..tr.len()).map(|k| tr.row(k).to_vec()).collect();
    Ok((tr.t, rows))
}

/// AP metrics and regime of a run.
#[pyfunction]
#[pyo3(signature = (model, t_end, params=None, ic=None, stim_amplitude=0.0, stim_duration=2.0, stim_period=None))]
fn metrics(
    py: Python<'_>,
    model: &str,
    t_end: f64,
    params: Option<HashMap<String, f64>>,
    ic: Option<Vec<f64>>,
    stim_amplitude: f64,
    stim_duration: f64,
    stim_period: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let (m, p) = setup(model, params)?;
    let x0 = initial(&*m, ic)?;
    let stim = pulse(stim_amplitude, stim_duration, stim_period);
    let v = py
        .detach(|| -> cardiobif::Result<Value> {
            let opts = SimOptions { sampling: Sampling::Steps, keep_dense: true };
            let tr = integrate(&*m, &p, &x0, 0.0, t_end, &stim, &SolverConfig::default(), &opts)?;
            let ps = PeriodSettings::default();
            let am = ap_metrics(&tr, &ps, &EadSettings::default());
            let reg = regime(&tr, &ps);
            Ok(serde_json::to_value(RunMetrics::new(model, &am, None, reg))?)
        })
        .map_err(err)?;
    to_py(py, &v)
}

/// Every equilibrium with eigenvalues and stability.
#[pyfunction]
#[pyo3(signature = (model, params=None))]
fn equilibria(py: Python<'_>, model: &str, params: Option<HashMap<String, f64>>) -> PyResult<Py<PyAny>> {
    let (m, p) = setup(model, params)?;
    let eqs = find_all_equilibria(&*m, &p, DEFAULT_RANGE, 2500);
    to_py(py, &serde_json::to_value(&eqs).map_err(|e| err(e.into()))?)
}

/// Bifurcations on the rest branch between `lo` and `hi`.
#[pyfunction]
#[pyo3(signature = (model, param, lo, hi, params=None))]
fn continue_equilibria(
    py: Python<'_>,
    model: &str,
    param: &str,
    lo: f64,
    hi: f64,
    params: Option<HashMap<String, f64>>,
) -> PyResult<Py<PyAny>> {
    let (m, p) = setup(model, params)?;
    let s = ContinuationSettings::default();
    let b = py.detach(|| continue_from_rest(&*m, &p, param, (lo, hi), &s)).map_err(err)?;
    to_py(py, &serde_json::to_value(&b.bifurcations).map_err(|e| err(e.into()))?)
}

/// Largest Lyapunov exponent and chaos verdict.
#[pyfunction]
#[pyo3(signature = (model, params=None, ic=None, horizon=None, seed=0))]
fn lyapunov(
    py: Python<'_>,
    model: &str,
    params: Option<HashMap<String, f64>>,
    ic: Option<Vec<f64>>,
    horizon: Option<f64>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let (m, p) = setup(model, params)?;
    let x0 = initial(&*m, ic)?;
    let mut s = LyapunovSettings { seed, ..Default::default() };
    if let Some(h) = horizon {
        s.horizon = h;
    }
    let r = py
        .detach(|| largest_lyapunov(&*m, &p, &x0, &StimulusProtocol::none(), &SolverConfig::default(), &s))
        .map_err(err)?;
    to_py(py, &json!({ "lambda1": r.lambda1, "drift": r.drift, "verdict": r.verdict.as_str() }))
}

/// Mode-k stability of the rest state; returns (modes, first k after which all are stable).
#[pyfunction]
#[pyo3(signature = (model, params=None, kmax=200, length=1.0, diffusion=cable::DEFAULT_DIFFUSION))]
fn modes(
    py: Python<'_>,
    model: &str,
    params: Option<HashMap<String, f64>>,
    kmax: usize,
    length: f64,
    diffusion: f64,
) -> PyResult<(Py<PyAny>, Option<usize>)> {
    let (m, p) = setup(model, params)?;
    let eq = find_rest(&*m, &p).map_err(err)?;
    let (ms, kstar) = cable::mode_scan(&*m, &p, &eq.state, kmax, length, diffusion).map_err(err)?;
    Ok((to_py(py, &serde_json::to_value(&ms).map_err(|e| err(e.into()))?)?, kstar))
}

#[pyfunction]
fn cable_scenarios() -> Vec<String> {
    cable::NOBLE_SCENARIOS.iter().chain(cable::BERNUS_SCENARIOS.iter()).map(|s| s.to_string()).collect()
}

/// Run a cable preset; returns the report dict.
#[pyfunction]
#[pyo3(signature = (scenario, t_end=None, cells=None, lyapunov=true))]
fn run_cable(py: Python<'_>, scenario: &str, t_end: Option<f64>, cells: Option<usize>, lyapunov: bool) -> PyResult<Py<PyAny>> {
    let mut cfg = cable::cable_scenario(scenario).map_err(err)?;
    if let Some(t) = t_end {
        cfg.t_end = t;
    }
    if let Some(n) = cells {
        cfg.cells = n;
    }
    if !lyapunov {
        cfg.probes.lyapunov = None;
    }
    let m = load_model(&cfg.model).map_err(err)?;
    let (_, report) = py.detach(|| cable::run_cable(&*m, &cfg, &cable::cable_solver())).map_err(err)?;
    to_py(py, &serde_json::to_value(&report).map_err(|e| err(e.into()))?)
}

#[pymodule]
fn pycardiobif(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(parameters, m)?)?;
    m.add_function(wrap_pyfunction!(state_names, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(equilibria, m)?)?;
    m.add_function(wrap_pyfunction!(continue_equilibria, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(modes, m)?)?;
    m.add_function(wrap_pyfunction!(cable_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_cable, m)?)?;
    Ok(())
}
