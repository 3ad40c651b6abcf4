//! 1D monodomain cable by the method of lines, plus the mode-wise
//! linearized stability of a homogeneous equilibrium.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    ap_metrics, largest_lyapunov_system, regime, EadSettings, LyapunovResult, LyapunovSettings, PeriodSettings, Verdict,
};
use crate::equilibria::{complex_list, eigenvalues, Stability};
use crate::error::{Error, Result};
use crate::integrator::{
    drive, Control, JacMatrix, JacStructure, OdeSystem, SolverConfig, Stimulated, StimulusProtocol, Trajectory,
};
use crate::model::{bernus, noble, CellModel, ParameterSet};

/// Diffusion constant (mS) of the standard cable.
pub const DEFAULT_DIFFUSION: f64 = 1.0 / 360.0;
/// Diffusion constant (mS) of the weakly coupled cables.
pub const SMALL_DIFFUSION: f64 = 5e-5;

/// Interval of the cable, with open or closed ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub lo_open: bool,
    #[serde(default = "yes")]
    pub hi_open: bool,
}

fn yes() -> bool {
    true
}

impl Interval {
    /// Half-open `[lo, hi)`.
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: false, hi_open: true }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: true, hi_open: true }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: false, hi_open: false }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        let below = if self.hi_open { x < self.hi } else { x <= self.hi };
        above && below
    }

    pub fn len(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0.0
    }

    fn overlap(&self, o: &Interval) -> f64 {
        (self.hi.min(o.hi) - self.lo.max(o.lo)).max(0.0)
    }
}

/// Cells whose centre lies in any of `intervals` share these settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub intervals: Vec<Interval>,
    /// Parameter overrides on top of the cable-wide parameters.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Initial state; the model default when empty.
    #[serde(default)]
    pub initial: Vec<f64>,
    /// Pulse amplitude (µA/cm²) while the cable-wide pulse is on.
    #[serde(default)]
    pub stimulus: f64,
}

/// Settings for the probe-cell verdicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    /// Probe positions as fractions of the length.
    pub positions: Vec<f64>,
    /// Whole-cable Lyapunov estimate run after the field; `None` skips it.
    pub lyapunov: Option<LyapunovSettings>,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings { positions: vec![0.0, 0.5, 1.0], lyapunov: None }
    }
}

/// A cable run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableConfig {
    /// Scenario label.
    #[serde(default)]
    pub id: String,
    /// Model spec as accepted by `load_model`.
    pub model: String,
    /// Cable length (cm).
    #[serde(default = "default_length")]
    pub length: f64,
    pub cells: usize,
    /// D = λ/(1+λ) M_i/χ (mS).
    #[serde(default = "default_diffusion")]
    pub diffusion: f64,
    pub t_end: f64,
    /// Spacing of stored field samples (ms).
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    /// Cable-wide parameter overrides.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub regions: Vec<Region>,
    /// Pulse timing; the amplitude acts as a factor on each region's stimulus.
    #[serde(default = "StimulusProtocol::none")]
    pub stimulus: StimulusProtocol,
    #[serde(default)]
    pub probes: ProbeSettings,
}

fn default_length() -> f64 {
    1.0
}
fn default_diffusion() -> f64 {
    DEFAULT_DIFFUSION
}
fn default_sample_dt() -> f64 {
    1.0
}

impl CableConfig {
    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Cell centres.
    pub fn centres(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.cells).map(|i| (i as f64 + 0.5) * h).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells < 3 {
            return Err(Error::Config(format!("a cable needs at least 3 cells, got {}", self.cells)));
        }
        if !(self.length > 0.0) || !(self.diffusion >= 0.0) || !(self.t_end > 0.0) || !(self.sample_dt > 0.0) {
            return Err(Error::Config("length, t_end and sample_dt must be positive and D >= 0".into()));
        }
        let all: Vec<(usize, &Interval)> =
            self.regions.iter().enumerate().flat_map(|(r, g)| g.intervals.iter().map(move |iv| (r, iv))).collect();
        for (_, iv) in &all {
            if !(iv.lo >= -1e-12 && iv.hi <= self.length + 1e-12 && iv.lo <= iv.hi) {
                return Err(Error::Config(format!("interval [{}, {}] outside [0, {}]", iv.lo, iv.hi, self.length)));
            }
        }
        for (i, (ra, a)) in all.iter().enumerate() {
            for (rb, b) in &all[i + 1..] {
                if a.overlap(b) > 1e-12 {
                    return Err(Error::Config(format!(
                        "regions `{}` and `{}` overlap on [{}, {}]",
                        self.regions[*ra].name,
                        self.regions[*rb].name,
                        a.lo.max(b.lo),
                        a.hi.min(b.hi)
                    )));
                }
            }
        }
        let covered: f64 = all.iter().map(|(_, iv)| iv.len()).sum();
        if (covered - self.length).abs() > 1e-9 * self.length.max(1.0) {
            return Err(Error::Config(format!("regions cover {covered} of a cable of length {}", self.length)));
        }
        self.cell_regions().map(|_| ())
    }

    /// Region index of every cell, by centre.
    pub fn cell_regions(&self) -> Result<Vec<usize>> {
        self.centres()
            .into_iter()
            .map(|x| {
                let hits: Vec<usize> = (0..self.regions.len())
                    .filter(|&r| self.regions[r].intervals.iter().any(|iv| iv.contains(x)))
                    .collect();
                match hits.as_slice() {
                    [r] => Ok(*r),
                    [] => Err(Error::Config(format!("no region contains the cell centre {x}"))),
                    _ => Err(Error::Config(format!("several regions contain the cell centre {x}"))),
                }
            })
            .collect()
    }

    /// Parameters of every region.
    pub fn region_params(&self, model: &dyn CellModel) -> Result<Vec<ParameterSet>> {
        let mut base = model.default_params();
        for (k, v) in &self.params {
            base.set(k, *v)?;
        }
        self.regions
            .iter()
            .map(|r| {
                let mut p = base.clone();
                for (k, v) in &r.params {
                    p.set(k, *v)?;
                }
                p.validate()?;
                Ok(p)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<CableConfig> {
        let c: CableConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

/// Piecewise-constant initial field, cell-major (`dim` values per cell).
pub fn build_region_ic(model: &dyn CellModel, cfg: &CableConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = model.dim();
    let regions = cfg.cell_regions()?;
    let default = model.default_state();
    for r in &cfg.regions {
        if !r.initial.is_empty() && r.initial.len() != d {
            return Err(Error::Dimension { expected: d, got: r.initial.len() });
        }
    }
    let mut y = Vec::with_capacity(d * cfg.cells);
    for r in regions {
        let s = &cfg.regions[r].initial;
        y.extend_from_slice(if s.is_empty() { &default } else { s });
    }
    Ok(y)
}

/// The coupled cable ODE, cell-major with V first in each block.
pub struct CableSystem<'a> {
    model: &'a dyn CellModel,
    params: Vec<ParameterSet>,
    region: Vec<usize>,
    amplitude: Vec<f64>,
    factor: f64,
    /// D / (C_m h²).
    coupling: f64,
    cells: usize,
}

impl<'a> CableSystem<'a> {
    pub fn new(model: &'a dyn CellModel, cfg: &CableConfig) -> Result<Self> {
        cfg.validate()?;
        let region = cfg.cell_regions()?;
        let amplitude = region.iter().map(|&r| cfg.regions[r].stimulus).collect();
        Ok(CableSystem {
            model,
            params: cfg.region_params(model)?,
            region,
            amplitude,
            factor: 0.0,
            coupling: cfg.diffusion / (model.capacitance() * cfg.h() * cfg.h()),
            cells: cfg.cells,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Diffusive current term of cell `c` (mV/ms), mirror ghosts at both ends.
    pub fn laplacian_term(&self, y: &[f64], c: usize) -> f64 {
        let d = self.model.dim();
        let v = |i: usize| y[i * d];
        let left = if c == 0 { v(0) } else { v(c - 1) };
        let right = if c + 1 == self.cells { v(c) } else { v(c + 1) };
        self.coupling * (left - 2.0 * v(c) + right)
    }
}

impl OdeSystem for CableSystem<'_> {
    fn dim(&self) -> usize {
        self.cells * self.model.dim()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.model.dim();
        for c in 0..self.cells {
            let s = c * d..(c + 1) * d;
            let p = &self.params[self.region[c]];
            self.model.eval_rhs(&y[s.clone()], p, self.factor * self.amplitude[c], &mut dy[s]);
            dy[c * d] += self.laplacian_term(y, c);
        }
    }

    fn structure(&self) -> JacStructure {
        let d = self.model.dim();
        JacStructure::Banded { kl: d, ku: d }
    }

    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut JacMatrix) {
        let JacMatrix::Banded(b) = jac else { return };
        let d = self.model.dim();
        let mut block = vec![0.0; d * d];
        b.data.iter_mut().for_each(|x| *x = 0.0);
        for c in 0..self.cells {
            let p = &self.params[self.region[c]];
            self.model.eval_jacobian(&y[c * d..(c + 1) * d], p, &mut block);
            let o = c * d;
            for i in 0..d {
                for j in 0..d {
                    b.set(o + i, o + j, block[i * d + j]);
                }
            }
            let mut diag = -2.0 * self.coupling;
            if c > 0 {
                b.set(o, o - d, self.coupling);
            } else {
                diag += self.coupling;
            }
            if c + 1 < self.cells {
                b.set(o, o + d, self.coupling);
            } else {
                diag += self.coupling;
            }
            let k = b.idx(o, o);
            b.data[k] += diag;
        }
    }
}

impl Stimulated for CableSystem<'_> {
    fn set_stimulus(&mut self, amplitude: f64) {
        self.factor = amplitude;
    }
}

/// Space-time membrane potential of a cable run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CableField {
    pub cells: usize,
    pub centres: Vec<f64>,
    pub times: Vec<f64>,
    /// Row-major, one row of `cells` potentials per time.
    pub v: Vec<f64>,
    /// Full states of the probe cells, one trajectory each.
    #[serde(skip)]
    pub probes: Vec<(usize, Trajectory)>,
    /// Final state of the whole cable.
    #[serde(skip)]
    pub final_state: Vec<f64>,
    /// Time at which integration failed, if it did.
    pub failure: Option<(f64, String)>,
    pub steps: usize,
}

impl CableField {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.v[k * self.cells..(k + 1) * self.cells]
    }

    /// Potential of one cell over time.
    pub fn cell(&self, c: usize) -> Vec<f64> {
        self.v.iter().skip(c).step_by(self.cells).copied().collect()
    }

    /// CSV with rows = time samples and columns = cells.
    pub fn to_csv(&self, stride: usize) -> String {
        let mut s = String::from("t");
        for c in 0..self.cells {
            let _ = write!(s, ",c{c}");
        }
        s.push('\n');
        for k in (0..self.times.len()).step_by(stride.max(1)) {
            let _ = write!(s, "{}", self.times[k]);
            for v in self.row(k) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path, stride: usize) -> Result<()> {
        std::fs::write(path, self.to_csv(stride))?;
        Ok(())
    }
}

fn probe_cells(cfg: &CableConfig) -> Vec<usize> {
    let mut out: Vec<usize> = cfg
        .probes
        .positions
        .iter()
        .map(|&f| ((f.clamp(0.0, 1.0) * cfg.cells as f64).floor() as usize).min(cfg.cells - 1))
        .collect();
    out.dedup();
    out
}

/// Integrate the cable from `y0`. Integration failures end the field early
/// and are reported in [`CableField::failure`].
pub fn simulate_cable_from(
    model: &dyn CellModel,
    cfg: &CableConfig,
    solver: &SolverConfig,
    y0: &[f64],
) -> Result<CableField> {
    let mut sys = CableSystem::new(model, cfg)?;
    let d = model.dim();
    if y0.len() != d * cfg.cells {
        return Err(Error::Dimension { expected: d * cfg.cells, got: y0.len() });
    }
    let n = cfg.cells;
    let probes = probe_cells(cfg);
    let names = model.state_names().to_vec();
    let mut field = CableField {
        cells: n,
        centres: cfg.centres(),
        times: vec![0.0],
        v: (0..n).map(|c| y0[c * d]).collect(),
        probes: probes
            .iter()
            .map(|&c| {
                let tr = Trajectory { names: names.clone(), t: vec![0.0], y: y0[c * d..(c + 1) * d].to_vec(), ..Default::default() };
                (c, tr)
            })
            .collect(),
        final_state: Vec::new(),
        failure: None,
        steps: 0,
    };
    let mut y = y0.to_vec();
    let atol = solver.atol_for(d, n);
    let dt = cfg.sample_dt;
    let mut buf = vec![0.0; d * n];
    let res = drive(&mut sys, &mut y, 0.0, cfg.t_end, &cfg.stimulus, solver, &atol, &mut |v| {
        loop {
            let t = dt * field.times.len() as f64;
            if t > v.t + 1e-9 * dt || t > cfg.t_end + 1e-9 * dt {
                break;
            }
            let t = t.min(v.t);
            v.eval(t, &mut buf);
            field.times.push(t);
            field.v.extend((0..n).map(|c| buf[c * d]));
            for (c, tr) in field.probes.iter_mut() {
                tr.t.push(t);
                tr.y.extend_from_slice(&buf[*c * d..(*c + 1) * d]);
            }
        }
        Control::Continue
    });
    match res {
        Ok((_, stats)) => field.steps = stats.accepted,
        Err(e) => {
            let t = field.times.last().copied().unwrap_or(0.0);
            field.failure = Some((t, e.to_string()));
        }
    }
    field.final_state = y;
    Ok(field)
}

/// Integrate the cable from its region initial states.
pub fn simulate_cable(model: &dyn CellModel, cfg: &CableConfig, solver: &SolverConfig) -> Result<CableField> {
    let y0 = build_region_ic(model, cfg)?;
    simulate_cable_from(model, cfg, solver, &y0)
}

/// Diagnostics of one probe cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeReport {
    pub cell: usize,
    pub x: f64,
    pub regime: String,
    pub period: Option<f64>,
    pub v_max: f64,
    pub v_min: f64,
    pub apd90: Option<f64>,
    pub ead_count: usize,
    pub aps: usize,
    pub verdict: String,
}

/// Probe-cell diagnostics of a cable run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CableReport {
    pub config: CableConfig,
    pub probes: Vec<ProbeReport>,
    /// Whole-cable largest Lyapunov exponent (1/ms), when requested.
    pub lambda1: Option<f64>,
    pub lyapunov_verdict: Option<String>,
    /// Spread max V - min V over the cable at the last sample.
    pub terminal_spread: f64,
    pub terminal_mean: f64,
    pub failure: Option<(f64, String)>,
    pub wall_seconds: f64,
}

impl CableReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// True when any probe is classed chaotic.
    pub fn any_chaotic(&self) -> bool {
        self.probes.iter().any(|p| p.verdict == Verdict::Chaotic.as_str())
    }

    pub fn max_ead_count(&self) -> usize {
        self.probes.iter().map(|p| p.ead_count).max().unwrap_or(0)
    }
}

/// True when V varies by less than 0.1 mV over the last tenth of the run.
fn settled(tr: &Trajectory) -> bool {
    let v = tr.component(0);
    let tail = &v[v.len() - (v.len() / 10).max(1)..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    hi - lo < 0.1
}

/// Apply the single-cell diagnostics to each probe cell. A probe is chaotic
/// when the cable has a positive largest exponent and the probe's own trace
/// is aperiodic; a probe that has come to rest is never chaotic.
pub fn probe_report(
    cfg: &CableConfig,
    field: &CableField,
    lyap: Option<&LyapunovResult>,
    ps: &PeriodSettings,
    es: &EadSettings,
) -> CableReport {
    let probes = field
        .probes
        .iter()
        .map(|(c, tr)| {
            let m = ap_metrics(tr, ps, es);
            let reg = regime(tr, ps);
            let settled = settled(tr);
            let verdict = match lyap {
                _ if settled => Verdict::NonChaotic,
                Some(l) if l.verdict == Verdict::Chaotic && reg == "aperiodic" => Verdict::Chaotic,
                Some(l) if l.verdict == Verdict::Marginal && reg == "aperiodic" => Verdict::Marginal,
                None if reg == "aperiodic" => Verdict::Marginal,
                _ => Verdict::NonChaotic,
            };
            ProbeReport {
                cell: *c,
                x: field.centres[*c],
                regime: reg.to_string(),
                period: m.period,
                v_max: m.v_max,
                v_min: m.v_min,
                apd90: m.apd,
                ead_count: m.ead_count(),
                aps: m.aps.len(),
                verdict: verdict.as_str().to_string(),
            }
        })
        .collect();
    let last = field.times.len() - 1;
    let row = field.row(last);
    let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    CableReport {
        config: cfg.clone(),
        probes,
        lambda1: lyap.map(|l| l.lambda1),
        lyapunov_verdict: lyap.map(|l| l.verdict.as_str().to_string()),
        terminal_spread: hi - lo,
        terminal_mean: row.iter().sum::<f64>() / row.len() as f64,
        failure: field.failure.clone(),
        wall_seconds: 0.0,
    }
}

/// Simulate, estimate the whole-cable exponent from the final state when
/// requested, and build the probe report.
pub fn run_cable(model: &dyn CellModel, cfg: &CableConfig, solver: &SolverConfig) -> Result<(CableField, CableReport)> {
    let start = std::time::Instant::now();
    let field = simulate_cable(model, cfg, solver)?;
    let lyap = match (&cfg.probes.lyapunov, &field.failure) {
        (Some(ls), None) => {
            let mut sys = CableSystem::new(model, cfg)?;
            let d = model.dim();
            let atol = solver.atol_for(d, cfg.cells);
            let scale: Vec<f64> = (0..d * cfg.cells).map(|i| if i % d == 0 { ls.v_scale } else { 1.0 }).collect();
            Some(largest_lyapunov_system(&mut sys, &field.final_state, cfg.t_end, &cfg.stimulus, solver, &atol, &scale, ls)?)
        }
        _ => None,
    };
    let mut report = probe_report(cfg, &field, lyap.as_ref(), &PeriodSettings::default(), &EadSettings::default());
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((field, report))
}

// ----------------------------------------------------------------------------
// Mode analysis

/// Linearized stability of the spatial Neumann mode `k` about a homogeneous equilibrium.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeAnalysis {
    /// Mode index per spatial dimension.
    pub k: Vec<usize>,
    pub lengths: Vec<f64>,
    pub diffusion: f64,
    /// Added to J(0,0): -Σ(πk_i/ℓ_i)² D / C_m.
    pub shift: f64,
    /// Row-major Jacobian J_k.
    pub jacobian: Vec<f64>,
    #[serde(with = "complex_list")]
    pub eigenvalues: Vec<Complex64>,
    pub max_re: f64,
    pub stability: Stability,
}

/// Neumann eigenvalue Σ(πk_i/ℓ_i)² of the Laplacian on a box.
pub fn neumann_eigenvalue(k: &[usize], lengths: &[f64]) -> f64 {
    k.iter().zip(lengths).map(|(&k, &l)| (PI * k as f64 / l).powi(2)).sum()
}

/// Mode Jacobian on a box with side lengths `lengths`.
pub fn mode_jacobian_nd(
    model: &dyn CellModel,
    params: &ParameterSet,
    state: &[f64],
    k: &[usize],
    lengths: &[f64],
    diffusion: f64,
) -> Result<ModeAnalysis> {
    if k.len() != lengths.len() || k.is_empty() {
        return Err(Error::Config("one mode index per side length is required".into()));
    }
    if state.len() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: state.len() });
    }
    let n = state.len();
    let mut jac = vec![0.0; n * n];
    model.eval_jacobian(state, params, &mut jac);
    let shift = -neumann_eigenvalue(k, lengths) * diffusion / model.capacitance();
    jac[0] += shift;
    let eigs = eigenvalues(&DMatrix::from_row_slice(n, n, &jac))?;
    let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(ModeAnalysis {
        k: k.to_vec(),
        lengths: lengths.to_vec(),
        diffusion,
        // k = 0 reports +0 rather than -0
        shift: shift + 0.0,
        jacobian: jac,
        eigenvalues: eigs,
        max_re,
        stability: Stability::from_max_re(max_re),
    })
}

/// Mode Jacobian of a 1D cable of length `length`.
pub fn mode_jacobian(
    model: &dyn CellModel,
    params: &ParameterSet,
    state: &[f64],
    k: usize,
    length: f64,
    diffusion: f64,
) -> Result<ModeAnalysis> {
    mode_jacobian_nd(model, params, state, &[k], &[length], diffusion)
}

/// Modes 0..=kmax and the smallest k* beyond which every mode is stable.
pub fn mode_scan(
    model: &dyn CellModel,
    params: &ParameterSet,
    state: &[f64],
    kmax: usize,
    length: f64,
    diffusion: f64,
) -> Result<(Vec<ModeAnalysis>, Option<usize>)> {
    let modes: Vec<ModeAnalysis> =
        (0..=kmax).map(|k| mode_jacobian(model, params, state, k, length, diffusion)).collect::<Result<_>>()?;
    let tail = modes.iter().rposition(|m| m.stability != Stability::Stable).map_or(0, |i| i + 1);
    Ok((modes, (tail <= kmax).then_some(tail)))
}

/// CSV of a mode scan: `k,shift,max_re,stability`.
pub fn modes_csv(modes: &[ModeAnalysis]) -> String {
    let mut s = String::from("k,shift,max_re,stability\n");
    for m in modes {
        let k: Vec<String> = m.k.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(s, "{},{},{},{}", k.join(";"), m.shift, m.max_re, m.stability.as_str());
    }
    s
}

/// Single-cell system with the mode-k damping about `V_inf` added to dV/dt.
/// Its equilibrium coincides with the cell's for every k.
pub struct ModeSystem<'a> {
    pub model: &'a dyn CellModel,
    pub params: &'a ParameterSet,
    pub v_inf: f64,
    /// (πk/ℓ)² D / C_m.
    pub damping: f64,
    pub i_stim: f64,
}

impl<'a> ModeSystem<'a> {
    pub fn new(model: &'a dyn CellModel, params: &'a ParameterSet, v_inf: f64, k: usize, length: f64, diffusion: f64) -> Self {
        let damping = neumann_eigenvalue(&[k], &[length]) * diffusion / model.capacitance();
        ModeSystem { model, params, v_inf, damping, i_stim: 0.0 }
    }
}

impl OdeSystem for ModeSystem<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.model.eval_rhs(y, self.params, self.i_stim, dy);
        dy[0] -= self.damping * (y[0] - self.v_inf);
    }
    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut JacMatrix) {
        if let JacMatrix::Dense(d) = jac {
            self.model.eval_jacobian(y, self.params, d);
            d[0] -= self.damping;
        }
    }
}

impl Stimulated for ModeSystem<'_> {
    fn set_stimulus(&mut self, amplitude: f64) {
        self.i_stim = amplitude;
    }
}

// ----------------------------------------------------------------------------
// Scenario presets

/// Leak conductance of the Noble cable runs.
pub const NOBLE_CABLE_GL: f64 = 0.1845;
pub const NOBLE_CABLE_CELLS: usize = 256;
pub const BERNUS_CABLE_CELLS: usize = 128;
/// G_Ca inside the EAD-prone region.
pub const EAD_GCA: f64 = 0.096229;
/// G_Ca of cells close to the EAD setting.
pub const NEAR_EAD_GCA: f64 = 0.09616;
/// Standard G_Ca.
pub const NORMAL_GCA: f64 = 0.064;
/// G_Ca inside the chaos-prone region.
pub const CHAOS_GCA: f64 = 0.0962518;

pub const NOBLE_SCENARIOS: [&str; 5] =
    ["noble-rest", "noble-stable", "noble-chaos", "noble-split-large-D", "noble-chaos-small-D"];
pub const BERNUS_SCENARIOS: [&str; 7] =
    ["ead-1pct", "ead-2pct", "ead-50pct", "ead-normal-surround", "chaos-a", "chaos-b", "chaos-c"];

/// Complement of `inner` (sorted, disjoint) within [0, length], with
/// complementary open/closed ends.
fn complement(inner: &[Interval], length: f64) -> Vec<Interval> {
    let mut out = Vec::new();
    let (mut at, mut at_open) = (0.0, false);
    for iv in inner {
        if iv.lo > at || (iv.lo == at && at_open && !iv.lo_open) {
            out.push(Interval { lo: at, hi: iv.lo, lo_open: at_open, hi_open: !iv.lo_open });
        }
        at = iv.hi;
        at_open = !iv.hi_open;
    }
    if at < length {
        out.push(Interval { lo: at, hi: length, lo_open: at_open, hi_open: false });
    }
    out
}

fn two_regions(inside: Region, outside: Region, length: f64) -> Vec<Region> {
    let mut outside = outside;
    outside.intervals = complement(&inside.intervals, length);
    let mut v = vec![inside, outside];
    v.retain(|r| r.intervals.iter().any(|iv| !iv.is_empty()));
    v
}

fn region(name: &str, intervals: Vec<Interval>, params: &[(&str, f64)], initial: &[f64], stimulus: f64) -> Region {
    Region {
        name: name.into(),
        intervals,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        initial: initial.to_vec(),
        stimulus,
    }
}

/// Noble cable with the chaotic initial state on `d` and the rest state elsewhere.
pub fn noble_cable(id: &str, d: Vec<Interval>, diffusion: f64, t_end: f64) -> CableConfig {
    let inside = region("chaotic", d, &[], &noble::CHAOTIC_STATE, 0.0);
    let outside = region("rest", Vec::new(), &[], &noble::REST_STATE, 0.0);
    CableConfig {
        id: id.into(),
        model: "noble".into(),
        length: 1.0,
        cells: NOBLE_CABLE_CELLS,
        diffusion,
        t_end,
        sample_dt: 1.0,
        params: [("G_L".to_string(), NOBLE_CABLE_GL)].into_iter().collect(),
        regions: two_regions(inside, outside, 1.0),
        stimulus: StimulusProtocol::none(),
        probes: ProbeSettings {
            lyapunov: Some(LyapunovSettings { horizon: 20_000.0, ..Default::default() }),
            ..Default::default()
        },
    }
}

/// Named Noble cable presets.
pub fn noble_cable_scenarios(id: &str) -> Result<CableConfig> {
    let s2 = 2f64.sqrt();
    let t = 10_000.0;
    let split = vec![Interval::open(0.1, 0.5), Interval::open(0.51, 0.9)];
    Ok(match id {
        "noble-rest" => noble_cable(id, Vec::new(), DEFAULT_DIFFUSION, t),
        "noble-stable" => noble_cable(id, vec![Interval::new(0.0, s2 - 1.0)], DEFAULT_DIFFUSION, t),
        "noble-chaos" => noble_cable(id, vec![Interval::new(0.0, s2 - 0.99)], DEFAULT_DIFFUSION, t),
        "noble-split-large-D" => noble_cable(id, split, DEFAULT_DIFFUSION, t),
        "noble-chaos-small-D" => noble_cable(id, split, SMALL_DIFFUSION, t),
        _ => return Err(unknown(id)),
    })
}

fn unknown(id: &str) -> Error {
    Error::NotFound(format!(
        "cable scenario `{id}` (known: {}, {})",
        NOBLE_SCENARIOS.join(", "),
        BERNUS_SCENARIOS.join(", ")
    ))
}

/// Bernus cable with 80% I_Kr block and a single 40 µA/cm², 2 ms pulse.
fn bernus_cable(id: &str, inside: Region, outside: Region, diffusion: f64, t_end: f64) -> CableConfig {
    CableConfig {
        id: id.into(),
        model: "bernus".into(),
        length: 1.0,
        cells: BERNUS_CABLE_CELLS,
        diffusion,
        t_end,
        sample_dt: 0.5,
        params: [("block_IKr".to_string(), 0.8)].into_iter().collect(),
        regions: two_regions(inside, outside, 1.0),
        stimulus: StimulusProtocol { amplitude: 1.0, start: 0.0, duration: bernus::STIM_DURATION, period: None, count: Some(1) },
        probes: ProbeSettings::default(),
    }
}

/// Named Bernus cable presets.
pub fn bernus_cable_scenarios(id: &str) -> Result<CableConfig> {
    let amp = bernus::STIM_AMPLITUDE;
    let rest = &bernus::REST_STATE;
    let ead = |id: &str, d: Interval, surround: f64| {
        let inside = region("ead-prone", vec![d], &[("G_Ca", EAD_GCA)], rest, amp);
        let outside = region("surround", Vec::new(), &[("G_Ca", surround)], rest, amp);
        bernus_cable(id, inside, outside, SMALL_DIFFUSION, 1000.0)
    };
    let chaos = |id: &str, surround: f64, diffusion: f64| {
        let d = Interval::new(0.2, 0.7);
        let inside = region("chaos-prone", vec![d], &[("G_Ca", CHAOS_GCA)], &bernus::CHAOTIC_STATE, 0.0);
        let outside = region("surround", Vec::new(), &[("G_Ca", surround)], rest, amp);
        let mut c = bernus_cable(id, inside, outside, diffusion, 3000.0);
        c.probes.positions = vec![0.0, 0.45, 1.0];
        c.probes.lyapunov = Some(LyapunovSettings { horizon: 4000.0, ..Default::default() });
        c
    };
    Ok(match id {
        "ead-1pct" => ead(id, Interval::new(0.49, 0.5), NEAR_EAD_GCA),
        "ead-2pct" => ead(id, Interval::new(0.48, 0.5), NEAR_EAD_GCA),
        "ead-50pct" => ead(id, Interval::new(0.2, 0.7), NEAR_EAD_GCA),
        "ead-normal-surround" => ead(id, Interval::new(0.2, 0.7), NORMAL_GCA),
        "chaos-a" => chaos(id, NORMAL_GCA, DEFAULT_DIFFUSION),
        "chaos-b" => chaos(id, NORMAL_GCA, SMALL_DIFFUSION),
        "chaos-c" => chaos(id, NEAR_EAD_GCA, SMALL_DIFFUSION),
        _ => return Err(unknown(id)),
    })
}

/// Any named preset.
pub fn cable_scenario(id: &str) -> Result<CableConfig> {
    if NOBLE_SCENARIOS.contains(&id) {
        noble_cable_scenarios(id)
    } else {
        bernus_cable_scenarios(id)
    }
}

/// Solver settings used for cable runs unless overridden.
pub fn cable_solver() -> SolverConfig {
    SolverConfig { rtol: 1e-6, atol_v: 1e-6, atol_gate: 1e-8, h_max: 5.0, ..Default::default() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{simulate, SimOptions};
    use crate::model::noble::Noble;

    fn uniform(cells: usize, diffusion: f64, t_end: f64, gl: f64) -> CableConfig {
        let mut c = noble_cable("u", Vec::new(), diffusion, t_end);
        c.cells = cells;
        c.params.insert("G_L".into(), gl);
        c.probes.lyapunov = None;
        c
    }

    #[test]
    fn interval_ends() {
        let iv = Interval::new(0.2, 0.7);
        assert!(iv.contains(0.2) && !iv.contains(0.7));
        let o = Interval::open(0.1, 0.5);
        assert!(!o.contains(0.1) && !o.contains(0.5) && o.contains(0.3));
    }

    #[test]
    fn complement_fills_gaps() {
        let inner = vec![Interval::open(0.1, 0.5), Interval::open(0.51, 0.9)];
        let c = complement(&inner, 1.0);
        assert_eq!(c.len(), 3);
        assert!(c[0].contains(0.1) && c[1].contains(0.5) && c[1].contains(0.51) && c[2].contains(1.0));
        assert!(complement(&[], 1.0)[0].contains(1.0));
    }

    #[test]
    fn overlapping_regions_rejected() {
        let mut c = uniform(16, DEFAULT_DIFFUSION, 10.0, 0.1);
        c.regions.push(region("extra", vec![Interval::new(0.3, 0.4)], &[], &[], 0.0));
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut gap = uniform(16, DEFAULT_DIFFUSION, 10.0, 0.1);
        gap.regions[0].intervals = vec![Interval::new(0.0, 0.5)];
        assert!(matches!(gap.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn empty_chaotic_region_gives_rest_field() {
        let m = Noble::new();
        let c = noble_cable("x", Vec::new(), DEFAULT_DIFFUSION, 10.0);
        let y = build_region_ic(&m, &c).unwrap();
        assert!(y.chunks(4).all(|s| s == noble::REST_STATE));
    }

    #[test]
    fn chaotic_cells_by_centre() {
        let m = Noble::new();
        let b = 2f64.sqrt() - 1.0;
        let c = noble_cable("x", vec![Interval::new(0.0, b)], DEFAULT_DIFFUSION, 10.0);
        let y = build_region_ic(&m, &c).unwrap();
        for (i, s) in y.chunks(4).enumerate() {
            let x = (i as f64 + 0.5) / 256.0;
            let want = if x < b { noble::CHAOTIC_STATE } else { noble::REST_STATE };
            assert_eq!(s, want, "cell {i}");
        }
        // Centres below √2 - 1 ≈ 0.41421: cells 0..=105.
        assert_eq!(y.chunks(4).filter(|s| *s == noble::CHAOTIC_STATE).count(), 106);
    }

    #[test]
    fn bernus_regions_match_presets() {
        let c = bernus_cable_scenarios("ead-2pct").unwrap();
        let m = bernus::bernus().unwrap();
        let p = c.region_params(&m).unwrap();
        let r = c.cell_regions().unwrap();
        let gca: Vec<f64> = r.iter().map(|&i| p[i].get("G_Ca").unwrap()).collect();
        for (i, g) in gca.iter().enumerate() {
            let x = (i as f64 + 0.5) / 128.0;
            let want = if (0.48..0.5).contains(&x) { EAD_GCA } else { NEAR_EAD_GCA };
            assert_eq!(*g, want);
        }
        assert_eq!(c.diffusion, SMALL_DIFFUSION);
        assert!(bernus_cable_scenarios("nope").is_err());
        let a = bernus_cable_scenarios("chaos-a").unwrap();
        assert_eq!(a.diffusion, DEFAULT_DIFFUSION);
        assert_eq!(a.regions[0].initial, bernus::CHAOTIC_STATE.to_vec());
        assert_eq!(a.regions[0].stimulus, 0.0);
        assert_eq!(a.regions[1].stimulus, 40.0);
    }

    #[test]
    fn config_roundtrips_through_json() {
        let c = cable_scenario("noble-chaos-small-D").unwrap();
        let back = CableConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn laplacian_vanishes_on_uniform_state() {
        let m = Noble::new();
        let c = uniform(9, 1.0, 10.0, 0.1);
        let sys = CableSystem::new(&m, &c).unwrap();
        let y: Vec<f64> = std::iter::repeat(noble::CHAOTIC_STATE).take(9).flatten().collect();
        for cell in 0..9 {
            assert_eq!(sys.laplacian_term(&y, cell), 0.0);
        }
    }

    #[test]
    fn banded_jacobian_matches_differences() {
        let m = Noble::new();
        let c = uniform(5, 0.3, 10.0, 0.1);
        let sys = CableSystem::new(&m, &c).unwrap();
        let n = sys.dim();
        let y: Vec<f64> = (0..n).map(|i| if i % 4 == 0 { -70.0 + 7.0 * (i / 4) as f64 } else { 0.3 + 0.01 * i as f64 }).collect();
        let mut jac = JacMatrix::for_structure(n, sys.structure());
        sys.jacobian(0.0, &y, &mut jac);
        let JacMatrix::Banded(b) = jac else { panic!() };
        let (mut f0, mut f1) = (vec![0.0; n], vec![0.0; n]);
        for j in 0..n {
            let h = 1e-6 * y[j].abs().max(1e-2);
            let (mut yp, mut ym) = (y.clone(), y.clone());
            yp[j] += h;
            ym[j] -= h;
            sys.rhs(0.0, &yp, &mut f0);
            sys.rhs(0.0, &ym, &mut f1);
            for i in 0..n {
                let fd = (f0[i] - f1[i]) / (2.0 * h);
                let an = b.get(i, j);
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "({i},{j}) {fd} vs {an}");
                if !b.in_band(i, j) {
                    assert!(fd.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_diffusion_decouples_cells() {
        let m = Noble::new();
        let mut c = noble_cable("d0", vec![Interval::new(0.0, 0.5)], 0.0, 600.0);
        c.cells = 8;
        c.probes.positions = vec![0.0, 1.0];
        let solver = SolverConfig { rtol: 1e-9, atol_v: 1e-9, atol_gate: 1e-11, ..Default::default() };
        let f = simulate_cable(&m, &c, &solver).unwrap();
        let p = c.region_params(&m).unwrap()[0].clone();
        let opts = SimOptions { keep_dense: true, ..Default::default() };
        for (ic, col) in [(noble::CHAOTIC_STATE, 0), (noble::REST_STATE, 7)] {
            let single = simulate(&m, &p, &ic, 0.0, 600.0, &StimulusProtocol::none(), &solver, &opts).unwrap();
            let v = f.cell(col);
            let dev = f.times.iter().zip(&v).map(|(&t, &x)| (single.eval(t, 0).unwrap() - x).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-4, "cell {col}: {dev}");
        }
    }

    /// Smooth profile relaxing under strong diffusion; measured order of
    /// the cell-centred scheme from three nested grids.
    #[test]
    fn spatial_convergence_is_second_order() {
        let m = Noble::new();
        let run = |cells: usize| {
            let mut c = uniform(cells, 0.5, 20.0, 0.1);
            c.probes.positions.clear();
            let y0: Vec<f64> = c
                .centres()
                .iter()
                .flat_map(|&x| {
                    let v = -70.0 + 10.0 * (PI * x).cos();
                    crate::model::steady_state_at(&m, v, &m.default_params())
                })
                .collect();
            let solver = SolverConfig { rtol: 1e-10, atol_v: 1e-10, atol_gate: 1e-12, ..Default::default() };
            let f = simulate_cable_from(&m, &c, &solver, &y0).unwrap();
            f.row(f.times.len() - 1).to_vec()
        };
        let coarsen = |v: &[f64]| v.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect::<Vec<f64>>();
        let (a, b, c) = (run(16), run(32), run(64));
        let e1 = a.iter().zip(coarsen(&b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let bc = coarsen(&c);
        let e2 = coarsen(&b).iter().zip(coarsen(&bc)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let order = (e1 / e2).log2();
        assert!(order >= 1.8, "order {order} ({e1}, {e2})");
    }

    #[test]
    fn mode_zero_is_the_cell_jacobian() {
        let m = Noble::new();
        let mut p = m.default_params();
        p.set("G_L", 0.075).unwrap();
        let eq = crate::equilibria::find_rest(&m, &p).unwrap();
        let k0 = mode_jacobian(&m, &p, &eq.state, 0, 1.0, DEFAULT_DIFFUSION).unwrap();
        let mut j = vec![0.0; 16];
        m.eval_jacobian(&eq.state, &p, &mut j);
        assert!(k0.jacobian.iter().zip(&j).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(k0.eigenvalues, eq.eigenvalues);
        assert_eq!(k0.stability, eq.stability);
        let k1 = mode_jacobian(&m, &p, &eq.state, 1, 1.0, DEFAULT_DIFFUSION).unwrap();
        assert!((k1.shift + PI * PI / (360.0 * 12.0)).abs() < 1e-16);
        let k2d = mode_jacobian_nd(&m, &p, &eq.state, &[1, 2], &[1.0, 0.5], DEFAULT_DIFFUSION).unwrap();
        assert!((k2d.shift + 17.0 * PI * PI / (360.0 * 12.0)).abs() < 1e-15);
    }

    #[test]
    fn high_modes_stabilize() {
        let m = Noble::new();
        let mut p = m.default_params();
        p.set("G_L", 0.075).unwrap();
        let eq = crate::equilibria::find_rest(&m, &p).unwrap();
        assert_eq!(eq.stability, Stability::Unstable);
        let (modes, kstar) = mode_scan(&m, &p, &eq.state, 200, 1.0, DEFAULT_DIFFUSION).unwrap();
        let kstar = kstar.expect("stable tail");
        assert!(kstar > 0 && modes[kstar..].iter().all(|m| m.max_re < 0.0));
        assert!(modes_csv(&modes).lines().count() == 202);
    }

    #[test]
    fn mode_system_keeps_the_equilibrium() {
        let m = Noble::new();
        let mut p = m.default_params();
        p.set("G_L", 0.4).unwrap();
        let eq = crate::equilibria::find_rest(&m, &p).unwrap();
        for k in [0, 1, 5, 50] {
            let sys = ModeSystem::new(&m, &p, eq.v(), k, 1.0, DEFAULT_DIFFUSION);
            let mut dy = vec![0.0; 4];
            sys.rhs(0.0, &eq.state, &mut dy);
            assert!(dy.iter().all(|x| x.abs() < 1e-9), "k = {k}: {dy:?}");
        }
    }
}
