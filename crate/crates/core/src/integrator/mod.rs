//! Stiff time integration of cell models under square-pulse stimulation.

pub mod radau;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CellModel, ParameterSet};
pub use radau::{Control, DenseSegment, JacMatrix, JacStructure, OdeSystem, Radau5, RadauOptions, Stats, StepView};

/// Tolerances and step limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rtol: f64,
    /// Absolute tolerance on membrane potentials.
    pub atol_v: f64,
    /// Absolute tolerance on gating variables.
    pub atol_gate: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { rtol: 1e-10, atol_v: 1e-12, atol_gate: 1e-14, h_init: 1e-4, h_max: 50.0, max_steps: 20_000_000 }
    }
}

impl SolverConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        SolverConfig { rtol, atol_v: atol, atol_gate: atol * 1e-2, ..Default::default() }
    }

    /// Absolute tolerances for `cells` copies of a `dim`-dimensional cell
    /// laid out contiguously (V first in each block).
    pub fn atol_for(&self, dim: usize, cells: usize) -> Vec<f64> {
        let mut a = Vec::with_capacity(dim * cells);
        for _ in 0..cells {
            a.push(self.atol_v);
            a.extend(std::iter::repeat(self.atol_gate).take(dim - 1));
        }
        a
    }

    pub fn radau(&self, atol: Vec<f64>) -> RadauOptions {
        RadauOptions { rtol: self.rtol, atol, h_init: self.h_init, h_max: self.h_max, max_steps: self.max_steps }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol_v > 0.0 && self.atol_gate > 0.0 && self.h_max > 0.0) {
            return Err(Error::Config("tolerances and h_max must be positive".into()));
        }
        Ok(())
    }
}

/// Train of square current pulses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StimulusProtocol {
    /// Injected current (µA/cm²); positive depolarizes.
    pub amplitude: f64,
    pub start: f64,
    pub duration: f64,
    /// Pulse period; `None` for a single pulse.
    pub period: Option<f64>,
    /// Number of pulses; `None` means unbounded when periodic.
    pub count: Option<usize>,
}

impl StimulusProtocol {
    pub fn none() -> Self {
        StimulusProtocol { amplitude: 0.0, start: 0.0, duration: 0.0, period: None, count: Some(0) }
    }

    pub fn periodic(amplitude: f64, start: f64, duration: f64, period: f64) -> Self {
        StimulusProtocol { amplitude, start, duration, period: Some(period), count: None }
    }

    pub fn is_silent(&self) -> bool {
        self.amplitude == 0.0 || self.duration <= 0.0 || self.count == Some(0)
    }

    fn pulse_count_limit(&self) -> usize {
        match (self.period, self.count) {
            (_, Some(c)) => c,
            (None, None) => 1,
            (Some(_), None) => usize::MAX,
        }
    }

    fn pulse_start(&self, k: usize) -> f64 {
        self.start + self.period.unwrap_or(0.0) * k as f64
    }

    /// Current at time `t` (pulses are closed on the left, open on the right).
    pub fn current(&self, t: f64) -> f64 {
        if self.is_silent() || t < self.start {
            return 0.0;
        }
        let k = match self.period {
            Some(p) if p > 0.0 => ((t - self.start) / p).floor() as usize,
            _ => 0,
        };
        if k >= self.pulse_count_limit() {
            return 0.0;
        }
        let s = self.pulse_start(k);
        if t >= s && t < s + self.duration {
            self.amplitude
        } else {
            0.0
        }
    }

    /// Pulse edges strictly inside (t0, t1), ascending.
    pub fn edges(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if self.is_silent() {
            return out;
        }
        let limit = self.pulse_count_limit();
        let mut k = match self.period {
            Some(p) if p > 0.0 && t0 > self.start => (((t0 - self.start) / p).floor() as usize).saturating_sub(1),
            _ => 0,
        };
        while k < limit {
            let s = self.pulse_start(k);
            if s >= t1 {
                break;
            }
            for e in [s, s + self.duration] {
                if e > t0 && e < t1 {
                    out.push(e);
                }
            }
            if self.period.unwrap_or(0.0) <= 0.0 {
                break;
            }
            k += 1;
        }
        out
    }
}

/// An ODE system whose injected current can be switched between segments.
pub trait Stimulated: OdeSystem {
    fn set_stimulus(&mut self, amplitude: f64);
}

/// Single cell driven by a constant injected current.
pub struct CellSystem<'a> {
    pub model: &'a dyn CellModel,
    pub params: &'a ParameterSet,
    pub i_stim: f64,
}

impl<'a> CellSystem<'a> {
    pub fn new(model: &'a dyn CellModel, params: &'a ParameterSet) -> Self {
        CellSystem { model, params, i_stim: 0.0 }
    }
}

impl OdeSystem for CellSystem<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.model.eval_rhs(y, self.params, self.i_stim, dy);
    }
    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut JacMatrix) {
        if let JacMatrix::Dense(d) = jac {
            self.model.eval_jacobian(y, self.params, d);
        }
    }
}

impl Stimulated for CellSystem<'_> {
    fn set_stimulus(&mut self, amplitude: f64) {
        self.i_stim = amplitude;
    }
}

/// Integrate `sys` over [t0, t1], restarting the solver at every pulse edge.
/// Returns the time reached and the accumulated statistics.
#[allow(clippy::too_many_arguments)]
pub fn drive<S: Stimulated>(
    sys: &mut S,
    y: &mut [f64],
    t0: f64,
    t1: f64,
    stim: &StimulusProtocol,
    cfg: &SolverConfig,
    atol: &[f64],
    observer: &mut dyn FnMut(&StepView) -> Control,
) -> Result<(f64, Stats)> {
    cfg.validate()?;
    if y.len() != sys.dim() {
        return Err(Error::Dimension { expected: sys.dim(), got: y.len() });
    }
    let mut stats = Stats::default();
    if t1 <= t0 {
        return Ok((t0, stats));
    }
    let mut bounds = vec![t0];
    bounds.extend(stim.edges(t0, t1));
    bounds.push(t1);
    let mut h = cfg.h_init;
    let mut stopped = false;
    let mut t = t0;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        sys.set_stimulus(stim.current(0.5 * (a + b)));
        let mut opts = cfg.radau(atol.to_vec());
        opts.h_init = h;
        let mut solver = Radau5::new(&*sys, &opts)?;
        let mut obs = |v: &StepView| {
            let c = observer(v);
            if c == Control::Stop {
                stopped = true;
            }
            c
        };
        let res = solver.integrate(a, y, b, &mut obs);
        stats.add(&solver.stats);
        t = res?;
        h = solver.h_next;
        if stopped {
            break;
        }
        // The state jumps in slope at an edge; start the next segment small.
        h = h.min(cfg.h_init.max(1e-3));
    }
    Ok((t, stats))
}

/// How a [`Trajectory`] records the solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampling {
    /// Every accepted step.
    Steps,
    /// Uniform grid with this spacing, interpolated from dense output.
    Uniform(f64),
}

/// Recorded solution of a single-cell or multi-cell run.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub t: Vec<f64>,
    /// Row-major samples, `names.len()` values per time.
    pub y: Vec<f64>,
    /// Dense-output segments, when requested.
    pub dense: Option<Vec<DenseSegment>>,
    pub stats: Stats,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.y[k * d..(k + 1) * d]
    }

    /// Column `i` of the samples.
    pub fn component(&self, i: usize) -> Vec<f64> {
        let d = self.dim();
        self.y.iter().skip(i).step_by(d).copied().collect()
    }

    pub fn last_state(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    /// Interpolated component `i` at time `t` from dense segments.
    pub fn eval(&self, t: f64, i: usize) -> Option<f64> {
        let segs = self.dense.as_ref()?;
        let k = segs.partition_point(|s| s.t < t);
        let s = segs.get(k).or_else(|| segs.last())?;
        if t < s.t_old - 1e-12 || t > s.t + 1e-12 {
            return None;
        }
        Some(s.view().eval_comp(t, i))
    }

    /// CSV with header `t,<names>`, keeping every `stride`-th row.
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut s = String::new();
        s.push('t');
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for k in (0..self.len()).step_by(stride) {
            let _ = write!(s, "{}", self.t[k]);
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

/// Records samples (and optionally dense segments) during [`drive`].
pub struct Recorder {
    pub traj: Trajectory,
    sampling: Sampling,
    keep_dense: bool,
    next: f64,
    t_end: f64,
}

impl Recorder {
    pub fn new(names: Vec<String>, t0: f64, y0: &[f64], t_end: f64, sampling: Sampling, keep_dense: bool) -> Self {
        let mut traj = Trajectory { names, ..Default::default() };
        traj.t.push(t0);
        traj.y.extend_from_slice(y0);
        if keep_dense {
            traj.dense = Some(Vec::new());
        }
        let next = match sampling {
            Sampling::Steps => t0,
            Sampling::Uniform(dt) => t0 + dt,
        };
        Recorder { traj, sampling, keep_dense, next, t_end }
    }

    pub fn record(&mut self, v: &StepView) {
        match self.sampling {
            Sampling::Steps => {
                self.traj.t.push(v.t);
                self.traj.y.extend_from_slice(v.y);
            }
            Sampling::Uniform(dt) => {
                let d = v.y.len();
                while self.next <= v.t + 1e-9 * dt && self.next <= self.t_end + 1e-9 * dt {
                    let t = self.next.min(v.t);
                    self.traj.t.push(t);
                    let base = self.traj.y.len();
                    self.traj.y.resize(base + d, 0.0);
                    v.eval(t, &mut self.traj.y[base..]);
                    self.next = self.traj.t[0] + dt * (self.traj.t.len()) as f64;
                }
            }
        }
        if self.keep_dense {
            if let Some(d) = self.traj.dense.as_mut() {
                d.push(v.to_segment());
            }
        }
    }
}

/// Options for [`simulate`].
#[derive(Clone, Debug)]
pub struct SimOptions {
    pub sampling: Sampling,
    pub keep_dense: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { sampling: Sampling::Steps, keep_dense: false }
    }
}

/// Integrate one cell from `y0` over [t0, t1].
pub fn simulate(
    model: &dyn CellModel,
    params: &ParameterSet,
    y0: &[f64],
    t0: f64,
    t1: f64,
    stim: &StimulusProtocol,
    cfg: &SolverConfig,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if y0.len() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: y0.len() });
    }
    params.validate()?;
    let mut sys = CellSystem::new(model, params);
    let mut y = y0.to_vec();
    let mut rec = Recorder::new(model.state_names().to_vec(), t0, y0, t1, opts.sampling, opts.keep_dense);
    let atol = cfg.atol_for(model.dim(), 1);
    let (_, stats) = drive(&mut sys, &mut y, t0, t1, stim, cfg, &atol, &mut |v| {
        rec.record(v);
        Control::Continue
    })?;
    let mut traj = rec.traj;
    traj.stats = stats;
    Ok(traj)
}

/// Direction of a level crossing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Either,
}

/// Crossing polish tolerance (ms).
pub const CROSSING_TOL: f64 = 1e-8;

/// Root of `g` on [a, b] given a sign change, by safeguarded secant
/// (Illinois) steps falling back to bisection.
pub fn polish_root(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut ga = g(a);
    let mut gb = g(b);
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 {
        return b;
    }
    let mut side = 0;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let gc = g(c);
        if gc == 0.0 {
            return c;
        }
        if (gc > 0.0) == (gb > 0.0) {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
        // Guarantee interval shrinkage even when secant stalls.
        if (b - a).abs() > tol {
            let m = 0.5 * (a + b);
            let gm = g(m);
            if (gm > 0.0) == (gb > 0.0) {
                b = m;
                gb = gm;
            } else {
                a = m;
                ga = gm;
            }
        }
    }
    0.5 * (a + b)
}

/// Crossings of `level` by component `comp` within one accepted step,
/// polished on the dense output.
pub fn step_crossings(v: &StepView, comp: usize, level: f64, dir: Direction) -> Vec<f64> {
    const SUB: usize = 4;
    let mut out = Vec::new();
    let h = v.h();
    let mut ta = v.t_old;
    let mut ga = v.eval_comp(ta, comp) - level;
    for k in 1..=SUB {
        let tb = if k == SUB { v.t } else { v.t_old + h * k as f64 / SUB as f64 };
        let gb = v.eval_comp(tb, comp) - level;
        let up = ga < 0.0 && gb >= 0.0;
        let down = ga > 0.0 && gb <= 0.0;
        let take = match dir {
            Direction::Up => up,
            Direction::Down => down,
            Direction::Either => up || down,
        };
        if take {
            out.push(polish_root(&|t| v.eval_comp(t, comp) - level, ta, tb, CROSSING_TOL));
        }
        ta = tb;
        ga = gb;
    }
    out
}

/// All crossings of a recorded trajectory. Uses dense segments when kept;
/// otherwise interpolates linearly between samples.
pub fn find_crossings(traj: &Trajectory, comp: usize, level: f64, dir: Direction) -> Vec<f64> {
    if let Some(segs) = &traj.dense {
        return segs.iter().flat_map(|s| step_crossings(&s.view(), comp, level, dir)).collect();
    }
    let v = traj.component(comp);
    let mut out = Vec::new();
    for k in 1..v.len() {
        let (a, b) = (v[k - 1] - level, v[k] - level);
        let up = a < 0.0 && b >= 0.0;
        let down = a > 0.0 && b <= 0.0;
        let take = match dir {
            Direction::Up => up,
            Direction::Down => down,
            Direction::Either => up || down,
        };
        if take {
            let s = a / (a - b);
            out.push(traj.t[k - 1] + s * (traj.t[k] - traj.t[k - 1]));
        }
    }
    out
}
