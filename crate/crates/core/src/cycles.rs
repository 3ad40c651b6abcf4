//! Periodic orbits by single shooting: Newton on the return map with
//! a fixed-V section, Floquet multipliers from the monodromy matrix,
//! pseudo-arclength continuation and period-doubling branch switching.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::continuation::{BifKind, BifurcationPoint};
use crate::equilibria::complex_list;
use crate::error::{Error, Result};
use crate::integrator::{
    polish_root, step_crossings, Control, Direction, JacMatrix, JacStructure, OdeSystem, Radau5, SolverConfig,
};
use crate::linalg;
use crate::model::{CellModel, ParameterSet};

/// Shortest period accepted as a genuine cycle (ms).
pub const MIN_PERIOD: f64 = 1.0;

/// Distance of the critical multiplier from ±1 for a located PD or LPC to count.
pub const CRITICAL_MULTIPLIER_TOL: f64 = 1e-3;

/// Half-period return distance below which a doubled cycle is taken to
/// coincide with its period-one parent.
const MERGE_TOL: f64 = 1e-4;

/// Minimum dV/dt at the anchor relative to the steepest upstroke.
const SECTION_SLOPE_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShootingSettings {
    /// Scaled residual accepted by Newton.
    pub tol: f64,
    pub max_newton: usize,
    /// Voltage scale of the residual norm (mV).
    pub v_scale: f64,
    /// Absolute tolerance on variational components.
    pub var_atol: f64,
    pub mesh_points: usize,
    pub solver: SolverConfig,
}

impl Default for ShootingSettings {
    fn default() -> Self {
        ShootingSettings { tol: 1e-8, max_newton: 25, v_scale: 100.0, var_atol: 1e-9, mesh_points: 200, solver: SolverConfig::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitCycle {
    pub param: f64,
    pub period: f64,
    /// Anchor state on the section V = `section_v`.
    pub x0: Vec<f64>,
    pub section_v: f64,
    pub mesh_t: Vec<f64>,
    pub mesh: Vec<Vec<f64>>,
    /// All eigenvalues of the monodromy matrix.
    #[serde(with = "complex_list")]
    pub multipliers: Vec<Complex64>,
    /// Multipliers of the return map on the section (all but the trivial one).
    #[serde(with = "complex_list")]
    pub nontrivial: Vec<Complex64>,
    pub trivial: f64,
    pub stable: bool,
    pub max_nontrivial: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub residual: f64,
    /// 2-norm condition number of the shooting Jacobian.
    pub condition: f64,
}

impl LimitCycle {
    pub fn stability_str(&self) -> &'static str {
        if self.stable {
            "stable"
        } else {
            "unstable"
        }
    }
}

/// State, monodromy columns and optional parameter sensitivity integrated together.
struct VarSystem<'a> {
    model: &'a dyn CellModel,
    p: &'a ParameterSet,
    /// Parameters shifted by ±dp for the sensitivity forcing.
    shifted: Option<(ParameterSet, ParameterSet, f64)>,
    n: usize,
}

impl VarSystem<'_> {
    fn cols(&self) -> usize {
        self.n + usize::from(self.shifted.is_some())
    }
}

impl OdeSystem for VarSystem<'_> {
    fn dim(&self) -> usize {
        self.n * (1 + self.cols())
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n;
        let x = &y[..n];
        self.model.eval_rhs(x, self.p, 0.0, &mut dy[..n]);
        let mut j = [0.0; 144];
        let jb: &mut [f64] = if n * n <= 144 { &mut j[..n * n] } else { unreachable!() };
        self.model.eval_jacobian(x, self.p, jb);
        for c in 0..self.n {
            let col = &y[n * (1 + c)..n * (2 + c)];
            for i in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += jb[i * n + k] * col[k];
                }
                dy[n * (1 + c) + i] = s;
            }
        }
        if let Some((pp, pm, dp)) = &self.shifted {
            let base = n * (1 + n);
            let mut fp = [0.0; 12];
            let mut fm = [0.0; 12];
            self.model.eval_rhs(x, pp, 0.0, &mut fp[..n]);
            self.model.eval_rhs(x, pm, 0.0, &mut fm[..n]);
            let col = &y[base..base + n];
            for i in 0..n {
                let mut s = (fp[i] - fm[i]) / (2.0 * dp);
                for k in 0..n {
                    s += jb[i * n + k] * col[k];
                }
                dy[base + i] = s;
            }
        }
    }

    fn structure(&self) -> JacStructure {
        JacStructure::Blocks { size: self.n, shared: true }
    }

    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut JacMatrix) {
        if let JacMatrix::Blocks(b) = jac {
            self.model.eval_jacobian(&y[..self.n], self.p, &mut b[0]);
        }
    }
}

struct Plain<'a> {
    model: &'a dyn CellModel,
    p: &'a ParameterSet,
}

impl OdeSystem for Plain<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        self.model.eval_rhs(y, self.p, 0.0, dy);
    }
    fn jacobian(&self, _t: f64, y: &[f64], jac: &mut JacMatrix) {
        if let JacMatrix::Dense(d) = jac {
            self.model.eval_jacobian(y, self.p, d);
        }
    }
}

/// Result of integrating the variational system over one period.
pub struct FlowMap {
    pub x_t: Vec<f64>,
    /// Monodromy matrix dφ_T/dx0.
    pub m: DMatrix<f64>,
    /// dφ_T/dp, when requested.
    pub dp: Option<Vec<f64>>,
}

/// Flow of x0 over time `t`, with its state Jacobian and optionally the
/// sensitivity to parameter `param_idx`.
pub fn flow_map(
    model: &dyn CellModel,
    p: &ParameterSet,
    param_idx: Option<usize>,
    x0: &[f64],
    t: f64,
    s: &ShootingSettings,
) -> Result<FlowMap> {
    let n = model.dim();
    if n > 12 {
        return Err(Error::Precondition(format!("shooting supports up to 12 states, model has {n}")));
    }
    let shifted = param_idx.map(|k| {
        let v = p.at(k);
        let dp = 1e-6 * v.abs().max(1e-3);
        let mut pp = p.clone();
        pp.set_at(k, v + dp);
        let mut pm = p.clone();
        pm.set_at(k, v - dp);
        (pp, pm, dp)
    });
    let sys = VarSystem { model, p, shifted, n };
    let cols = sys.cols();
    let mut y = vec![0.0; n * (1 + cols)];
    y[..n].copy_from_slice(x0);
    for c in 0..n {
        y[n * (1 + c) + c] = 1.0;
    }
    let mut atol = s.solver.atol_for(n, 1);
    atol.extend(std::iter::repeat(s.var_atol).take(n * cols));
    let mut solver = Radau5::new(&sys, &s.solver.radau(atol))?;
    solver.integrate(0.0, &mut y, t, &mut |_| Control::Continue)?;
    let m = DMatrix::from_fn(n, n, |i, j| y[n * (1 + j) + i]);
    let dp = (cols > n).then(|| y[n * (1 + n)..n * (2 + n)].to_vec());
    Ok(FlowMap { x_t: y[..n].to_vec(), m, dp })
}

/// State after integrating `x0` for time `t` (no stimulus).
pub fn flow(model: &dyn CellModel, p: &ParameterSet, x0: &[f64], t: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let sys = Plain { model, p };
    let mut y = x0.to_vec();
    let mut solver = Radau5::new(&sys, &cfg.radau(cfg.atol_for(model.dim(), 1)))?;
    solver.integrate(0.0, &mut y, t, &mut |_| Control::Continue)?;
    Ok(y)
}

/// Fraction of a Newton step that keeps every gate inside (0, 1): a gate
/// headed out moves at most halfway to the boundary.
fn gate_step_fraction(gates: &[f64], step: &[f64]) -> f64 {
    let mut f: f64 = 1.0;
    for (&g, &d) in gates.iter().zip(step) {
        if g + d < 0.0 && g > 0.0 {
            f = f.min(0.5 * g / -d);
        } else if g + d > 1.0 && g < 1.0 {
            f = f.min(0.5 * (1.0 - g) / d);
        }
    }
    f
}

fn rhs_at(model: &dyn CellModel, p: &ParameterSet, x: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; x.len()];
    model.eval_rhs(x, p, 0.0, &mut f);
    f
}

fn scaled_norm(r: &[f64], v_scale: f64) -> f64 {
    r.iter().enumerate().fold(0.0f64, |m, (i, x)| m.max(if i == 0 { x.abs() / v_scale } else { x.abs() }))
}

/// Multipliers of the return map to the section V = const: the monodromy
/// projected along the flow and restricted to the gate coordinates.
fn section_multipliers(m: &DMatrix<f64>, f_end: &[f64]) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let fv = f_end[0];
    let reduced = DMatrix::from_fn(n - 1, n - 1, |i, j| m[(i + 1, j + 1)] - f_end[i + 1] * m[(0, j + 1)] / fv);
    linalg::eigenvalues(&reduced)
}

/// Distance to the nearest nontrivial multiplier below which the trivial
/// multiplier is taken from the block form.
const TRIVIAL_GAP: f64 = 1e-2;

/// Eigen-analysis of a converged cycle: (all, nontrivial, trivial).
fn floquet(m: &DMatrix<f64>, f_end: &[f64]) -> Result<(Vec<Complex64>, Vec<Complex64>, f64)> {
    let all = linalg::eigenvalues(m)?;
    let nontrivial = section_multipliers(m, f_end)?;
    // The trivial multiplier is the eigenvalue left after matching the
    // section multipliers. When a nontrivial multiplier comes close to it
    // (at a fold of cycles) that pick is ill-conditioned; then use the
    // block form instead: in the basis {f, gate directions} M is upper
    // triangular with the trivial multiplier above the section map, so
    // trivial = tr M - tr M_sec.
    let mut used = vec![false; all.len()];
    for mu in &nontrivial {
        let k = (0..all.len())
            .filter(|&k| !used[k])
            .min_by(|&a, &b| (all[a] - mu).norm().total_cmp(&(all[b] - mu).norm()))
            .unwrap();
        used[k] = true;
    }
    let left = (0..all.len()).find(|&k| !used[k]).map(|k| all[k]).unwrap_or(Complex64::new(f64::NAN, 0.0));
    let gap = nontrivial.iter().map(|mu| (mu - left).norm()).fold(f64::INFINITY, f64::min);
    let trivial = if gap < TRIVIAL_GAP {
        let n = m.nrows();
        let tr_sec: f64 = (1..n).map(|i| m[(i, i)] - f_end[i] * m[(0, i)] / f_end[0]).sum();
        m.trace() - tr_sec
    } else {
        left.re
    };
    Ok((all, nontrivial, trivial))
}

fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Sample one period of the orbit and its V range.
fn mesh(model: &dyn CellModel, p: &ParameterSet, x0: &[f64], t: f64, s: &ShootingSettings) -> Result<(Vec<f64>, Vec<Vec<f64>>, f64, f64)> {
    let sys = Plain { model, p };
    let mut y = x0.to_vec();
    let mut solver = Radau5::new(&sys, &s.solver.radau(s.solver.atol_for(model.dim(), 1)))?;
    let k = s.mesh_points.max(2);
    let mut ts = Vec::with_capacity(k + 1);
    let mut xs = Vec::with_capacity(k + 1);
    let (mut vmin, mut vmax) = (x0[0], x0[0]);
    let mut next = 0usize;
    let mut buf = vec![0.0; x0.len()];
    solver.integrate(0.0, &mut y, t, &mut |v| {
        for q in 0..8 {
            let tq = v.t_old + v.h() * q as f64 / 8.0;
            let vq = v.eval_comp(tq, 0);
            vmin = vmin.min(vq);
            vmax = vmax.max(vq);
        }
        while next <= k && (next as f64) * t / k as f64 <= v.t + 1e-12 {
            let tq = next as f64 * t / k as f64;
            v.eval(tq, &mut buf);
            ts.push(tq);
            xs.push(buf.clone());
            next += 1;
        }
        Control::Continue
    })?;
    vmin = vmin.min(y[0]);
    vmax = vmax.max(y[0]);
    Ok((ts, xs, vmin, vmax))
}

fn assemble(
    model: &dyn CellModel,
    p: &ParameterSet,
    param: f64,
    x0: Vec<f64>,
    period: f64,
    fm: &FlowMap,
    residual: f64,
    cond: f64,
    s: &ShootingSettings,
) -> Result<LimitCycle> {
    let f_end = rhs_at(model, p, &fm.x_t);
    let (all, nontrivial, trivial) = floquet(&fm.m, &f_end)?;
    let max_nt = nontrivial.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (mesh_t, mesh, v_min, v_max) = mesh(model, p, &x0, period, s)?;
    Ok(LimitCycle {
        param,
        period,
        section_v: x0[0],
        x0,
        mesh_t,
        mesh,
        multipliers: all,
        nontrivial,
        trivial,
        stable: max_nt < 1.0,
        max_nontrivial: max_nt,
        v_min,
        v_max,
        residual,
        condition: cond,
    })
}

/// Newton shooting at fixed parameters from a guess (anchor state, period).
/// The anchor's V defines the section.
pub fn find_limit_cycle(model: &dyn CellModel, p: &ParameterSet, guess: (&[f64], f64), s: &ShootingSettings) -> Result<LimitCycle> {
    let n = model.dim();
    let (g0, t0) = guess;
    if g0.len() != n {
        return Err(Error::Dimension { expected: n, got: g0.len() });
    }
    let mut x0 = g0.to_vec();
    let mut period = t0;
    let mut best = f64::INFINITY;
    for _ in 0..s.max_newton {
        if !(period >= MIN_PERIOD) {
            return Err(Error::DegenerateCycle(period));
        }
        let fm = flow_map(model, p, None, &x0, period, s)?;
        let r: Vec<f64> = fm.x_t.iter().zip(&x0).map(|(a, b)| a - b).collect();
        let res = scaled_norm(&r, s.v_scale);
        best = best.min(res);
        let f_end = rhs_at(model, p, &fm.x_t);
        let a = DMatrix::from_fn(n, n, |i, j| if j + 1 < n { fm.m[(i, j + 1)] - if i == j + 1 { 1.0 } else { 0.0 } } else { f_end[i] });
        if res < s.tol {
            if rhs_at(model, p, &x0)[0] <= 0.0 {
                return Err(Error::Convergence { msg: "cycle anchor has dV/dt <= 0 on the section".into(), residual: res });
            }
            let cond = condition_number(&a);
            return assemble(model, p, f64::NAN, x0, period, &fm, res, cond, s);
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = linalg::solve_dense(&a, &rhs)?;
        let f = gate_step_fraction(&x0[1..], &d[..n - 1]);
        let dt = (f * d[n - 1]).clamp(-0.2 * period, 0.2 * period);
        for i in 1..n {
            x0[i] += f * d[i - 1];
        }
        period += dt;
    }
    Err(Error::Convergence { msg: "shooting Newton".into(), residual: best })
}

/// Guess (anchor, period) from a settled simulation: the last two upward
/// crossings of the V midpoint of the final stretch.
pub fn guess_from_simulation(
    model: &dyn CellModel,
    p: &ParameterSet,
    ic: &[f64],
    settle: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, f64)> {
    let sys = Plain { model, p };
    let mut y = ic.to_vec();
    let mut solver = Radau5::new(&sys, &cfg.radau(cfg.atol_for(model.dim(), 1)))?;
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let tail = 0.7 * settle;
    let mut segs = Vec::new();
    solver.integrate(0.0, &mut y, settle, &mut |v| {
        if v.t >= tail {
            vmin = vmin.min(v.y[0]);
            vmax = vmax.max(v.y[0]);
            segs.push(v.to_segment());
        }
        Control::Continue
    })?;
    if !(vmax - vmin > 1e-3) {
        return Err(Error::NotFound("trajectory settles to a steady state".into()));
    }
    let level = 0.5 * (vmin + vmax);
    let mut hits: Vec<(f64, usize)> = Vec::new();
    for (k, s) in segs.iter().enumerate() {
        for t in step_crossings(&s.view(), 0, level, Direction::Up) {
            hits.push((t, k));
        }
    }
    if hits.len() < 2 {
        return Err(Error::NotFound("fewer than two upstrokes in the settled stretch".into()));
    }
    let (t1, k1) = hits[hits.len() - 2];
    let (t2, _) = hits[hits.len() - 1];
    let mut x = vec![0.0; model.dim()];
    segs[k1].view().eval(t1, &mut x);
    x[0] = level;
    Ok((x, t2 - t1))
}

/// Floquet multipliers of a converged cycle and the condition number of
/// the monodromy eigenproblem.
pub fn monodromy(model: &dyn CellModel, p: &ParameterSet, lc: &LimitCycle, s: &ShootingSettings) -> Result<(Vec<Complex64>, f64)> {
    let fm = flow_map(model, p, None, &lc.x0, lc.period, s)?;
    let eig = linalg::eigenvalues(&fm.m)?;
    Ok((eig, condition_number(&fm.m)))
}

// ----------------------------------------------------------------------------
// Continuation

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CycleContinuationSettings {
    pub ds_init: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// Period and parameter scales of the arclength norm.
    pub t_scale: f64,
    pub p_scale: f64,
    pub max_points: usize,
    pub max_newton: usize,
    pub loc_tol: f64,
    /// Stop when V_max - V_min falls below this (approach to a Hopf point).
    pub min_amplitude: f64,
    /// Stop when the period exceeds this multiple of the starting period.
    pub max_period_factor: f64,
    pub shooting: ShootingSettings,
}

impl Default for CycleContinuationSettings {
    fn default() -> Self {
        CycleContinuationSettings {
            ds_init: 1e-3,
            ds_min: 1e-7,
            ds_max: 2e-2,
            t_scale: 100.0,
            p_scale: 1.0,
            max_points: 4000,
            max_newton: 8,
            loc_tol: 1e-7,
            min_amplitude: 0.5,
            max_period_factor: 20.0,
            shooting: ShootingSettings::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CyclePoint {
    pub arclength: f64,
    pub cycle: LimitCycle,
    /// Re Π(µ + 1) over the nontrivial multipliers.
    pub pd_test: f64,
    /// Re Π(µ - 1) over the nontrivial multipliers.
    pub plus_one_test: f64,
    /// Parameter component of the unit tangent.
    pub tangent_p: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CycleBranch {
    pub model: String,
    pub param_name: String,
    pub points: Vec<CyclePoint>,
    pub bifurcations: Vec<BifurcationPoint>,
    /// Parameters where a multiplier crossed +1 without a fold.
    pub anomalies: Vec<f64>,
    pub truncated: bool,
    pub stop_reason: String,
}

impl CycleBranch {
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            param: f64,
            period: f64,
            max_multiplier: f64,
            stability: &'a str,
            v_min: f64,
            v_max: f64,
        }
        #[derive(Serialize)]
        struct Out<'a> {
            model: &'a str,
            param_name: &'a str,
            points: Vec<Row<'a>>,
            bifurcations: &'a [BifurcationPoint],
            anomalies: &'a [f64],
            truncated: bool,
            stop_reason: &'a str,
        }
        let out = Out {
            model: &self.model,
            param_name: &self.param_name,
            points: self
                .points
                .iter()
                .map(|p| Row {
                    param: p.cycle.param,
                    period: p.cycle.period,
                    max_multiplier: p.cycle.max_nontrivial,
                    stability: p.cycle.stability_str(),
                    v_min: p.cycle.v_min,
                    v_max: p.cycle.v_max,
                })
                .collect(),
            bifurcations: &self.bifurcations,
            anomalies: &self.anomalies,
            truncated: self.truncated,
            stop_reason: &self.stop_reason,
        };
        serde_json::to_string_pretty(&out).expect("cycle branch serializes")
    }

    /// CSV `param,V_min,V_max,T,stability`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("param,V_min,V_max,T,stability\n");
        for p in &self.points {
            let c = &p.cycle;
            s.push_str(&format!("{},{},{},{},{}\n", c.param, c.v_min, c.v_max, c.period, c.stability_str()));
        }
        s
    }

    pub fn of_kind(&self, kind: BifKind) -> Vec<&BifurcationPoint> {
        self.bifurcations.iter().filter(|b| b.kind == kind).collect()
    }
}

/// Scaled unknowns (gates, T / t_scale, p / p_scale) on a fixed-V section.
struct Shooter<'a> {
    model: &'a dyn CellModel,
    base: ParameterSet,
    idx: usize,
    section_v: f64,
    t_scale: f64,
    p_scale: f64,
    s: &'a ShootingSettings,
}

struct Solved {
    w: Vec<f64>,
    fm: FlowMap,
    jac: DMatrix<f64>,
    residual: f64,
    iters: usize,
}

impl Shooter<'_> {
    fn n(&self) -> usize {
        self.model.dim()
    }

    fn params(&self, p: f64) -> ParameterSet {
        let mut ps = self.base.clone();
        ps.set_at(self.idx, p);
        ps
    }

    fn unpack(&self, w: &[f64]) -> (Vec<f64>, f64, f64) {
        let n = self.n();
        let mut x = vec![self.section_v];
        x.extend_from_slice(&w[..n - 1]);
        (x, w[n - 1] * self.t_scale, w[n] * self.p_scale)
    }

    fn pack(&self, x: &[f64], t: f64, p: f64) -> Vec<f64> {
        let mut w = x[1..].to_vec();
        w.push(t / self.t_scale);
        w.push(p / self.p_scale);
        w
    }

    /// Residual and its n x (n+1) Jacobian in scaled unknowns.
    fn eval(&self, w: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>, FlowMap)> {
        let n = self.n();
        let (x0, t, p) = self.unpack(w);
        if !(t >= MIN_PERIOD) {
            return Err(Error::DegenerateCycle(t));
        }
        let ps = self.params(p);
        let fm = flow_map(self.model, &ps, Some(self.idx), &x0, t, self.s)?;
        let r: Vec<f64> = fm.x_t.iter().zip(&x0).map(|(a, b)| a - b).collect();
        let f_end = rhs_at(self.model, &ps, &fm.x_t);
        let dp = fm.dp.as_ref().unwrap();
        let jac = DMatrix::from_fn(n, n + 1, |i, j| {
            if j + 1 < n {
                fm.m[(i, j + 1)] - if i == j + 1 { 1.0 } else { 0.0 }
            } else if j + 1 == n {
                f_end[i] * self.t_scale
            } else {
                dp[i] * self.p_scale
            }
        });
        Ok((r, jac, fm))
    }

    /// Newton on [R(w) = 0; d·(w - pred) = 0].
    fn correct(&self, pred: &[f64], d: &[f64], max_it: usize) -> Result<Solved> {
        let n = self.n();
        let mut w = pred.to_vec();
        let mut best = f64::INFINITY;
        for it in 0..=max_it {
            let (r, jac, fm) = self.eval(&w)?;
            let res = scaled_norm(&r, self.s.v_scale);
            best = best.min(res);
            if !res.is_finite() {
                break;
            }
            let c: f64 = d.iter().zip(w.iter().zip(pred)).map(|(di, (wi, pi))| di * (wi - pi)).sum();
            if res < self.s.tol && c.abs() < 1e-10 {
                return Ok(Solved { w, fm, jac, residual: res, iters: it });
            }
            if it == max_it {
                break;
            }
            let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
            a.view_mut((0, 0), (n, n + 1)).copy_from(&jac);
            for j in 0..=n {
                a[(n, j)] = d[j];
            }
            let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            rhs.push(-c);
            let dw = linalg::solve_dense(&a, &rhs)?;
            let f = gate_step_fraction(&w[..n - 1], &dw[..n - 1]);
            let tmax = 0.2 * w[n - 1];
            for (k, (wi, di)) in w.iter_mut().zip(&dw).enumerate() {
                let di = f * di;
                *wi += if k == n - 1 { di.clamp(-tmax, tmax) } else { di };
            }
        }
        Err(Error::Convergence { msg: "cycle corrector".into(), residual: best })
    }

    fn tangent(&self, jac: &DMatrix<f64>, orient: &[f64]) -> Result<Vec<f64>> {
        let (mut t, _) = linalg::null_vector(jac)?;
        let dot: f64 = t.iter().zip(orient).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            t.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(t)
    }

    fn cycle(&self, sol: &Solved) -> Result<LimitCycle> {
        let (x0, t, p) = self.unpack(&sol.w);
        let ps = self.params(p);
        let cond = condition_number(&sol.jac.columns(0, self.n()).into_owned());
        assemble(self.model, &ps, p, x0, t, &sol.fm, sol.residual, cond, self.s)
    }
}

fn tests_of(c: &LimitCycle) -> (f64, f64) {
    let mut pd = Complex64::new(1.0, 0.0);
    let mut po = Complex64::new(1.0, 0.0);
    for mu in &c.nontrivial {
        pd *= mu + 1.0;
        po *= mu - 1.0;
    }
    (pd.re, po.re)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = linalg::norm2(v);
    v.iter().map(|x| x / n).collect()
}

/// Re-anchor a solved point onto a new section V = level by integrating to
/// the next upward crossing.
fn reanchor(model: &dyn CellModel, p: &ParameterSet, x0: &[f64], period: f64, level: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let sys = Plain { model, p };
    let mut y = x0.to_vec();
    let mut solver = Radau5::new(&sys, &cfg.radau(cfg.atol_for(model.dim(), 1)))?;
    let mut found: Option<Vec<f64>> = None;
    solver.integrate(0.0, &mut y, 1.5 * period, &mut |v| {
        if let Some(t) = step_crossings(v, 0, level, Direction::Up).first() {
            let mut x = vec![0.0; v.y.len()];
            v.eval(*t, &mut x);
            x[0] = level;
            found = Some(x);
            return Control::Stop;
        }
        Control::Continue
    })?;
    found.ok_or_else(|| Error::NotFound(format!("orbit does not cross V = {level}")))
}

/// Starting data for a cycle branch: either a converged cycle with an
/// initial direction in the parameter, or a branch switch.
pub enum CycleStart<'a> {
    Cycle { cycle: &'a LimitCycle, direction: f64 },
    Switch(&'a PdSwitch),
}

/// Continue a branch of cycles in parameter `param` within `range`.
pub fn continue_limit_cycles(
    model: &dyn CellModel,
    params: &ParameterSet,
    param: &str,
    start: CycleStart,
    range: (f64, f64),
    settings: &CycleContinuationSettings,
) -> Result<CycleBranch> {
    let idx = params.resolve(param)?;
    let (lo, hi) = (range.0.min(range.1), range.0.max(range.1));
    let (x_start, t_start, p_start, sec) = match &start {
        CycleStart::Cycle { cycle, .. } => {
            let p0 = if cycle.param.is_nan() { params.at(idx) } else { cycle.param };
            let mut ps = params.clone();
            ps.set_at(idx, p0);
            if section_ok(model, &ps, cycle) {
                (cycle.x0.clone(), cycle.period, p0, cycle.section_v)
            } else {
                let level = steep_level(model, &ps, cycle);
                let x = reanchor(model, &ps, &cycle.x0, cycle.period, level, &settings.shooting.solver)?;
                (x, cycle.period, p0, level)
            }
        }
        CycleStart::Switch(sw) => (sw.anchor.clone(), sw.period, sw.param, sw.anchor[0]),
    };
    let mut sh = Shooter {
        model,
        base: params.clone(),
        idx,
        section_v: sec,
        t_scale: settings.t_scale,
        p_scale: settings.p_scale,
        s: &settings.shooting,
    };
    let n = model.dim();
    let w_start = sh.pack(&x_start, t_start, p_start);
    let mut branch = CycleBranch {
        model: model.name().into(),
        param_name: params.names()[idx].clone(),
        points: Vec::new(),
        bifurcations: Vec::new(),
        anomalies: Vec::new(),
        truncated: false,
        stop_reason: String::new(),
    };

    // First point and direction.
    let (mut sol, mut t) = match &start {
        CycleStart::Cycle { direction, .. } => {
            let mut fix = vec![0.0; n + 1];
            fix[n] = 1.0;
            let sol = sh.correct(&w_start, &fix, settings.shooting.max_newton)?;
            let mut orient = vec![0.0; n + 1];
            orient[n] = direction.signum();
            let t = sh.tangent(&sol.jac, &orient)?;
            (sol, t)
        }
        CycleStart::Switch(sw) => {
            let d = unit(&sw.direction_scaled());
            let pred: Vec<f64> = w_start.iter().zip(&d).map(|(w, di)| w + sw.amplitude * di).collect();
            let sol = sh.correct(&pred, &d, settings.shooting.max_newton)?;
            let sec: Vec<f64> = sol.w.iter().zip(&w_start).map(|(a, b)| a - b).collect();
            let t = sh.tangent(&sol.jac, &sec)?;
            (sol, unit(&t))
        }
    };
    let c0 = sh.cycle(&sol)?;
    let (pd0, po0) = tests_of(&c0);
    let period0 = c0.period;
    branch.points.push(CyclePoint { arclength: 0.0, cycle: c0, pd_test: pd0, plus_one_test: po0, tangent_p: t[n] });

    let mut ds = settings.ds_init;
    let mut arc = 0.0;
    loop {
        if branch.points.len() >= settings.max_points {
            branch.stop_reason = "max points".into();
            break;
        }
        let pred: Vec<f64> = sol.w.iter().zip(&t).map(|(w, ti)| w + ds * ti).collect();
        let next = sh.correct(&pred, &t, settings.max_newton).ok().and_then(|s| {
            let step: Vec<f64> = s.w.iter().zip(&sol.w).map(|(a, b)| a - b).collect();
            let dist = linalg::norm2(&step);
            let tn = sh.tangent(&s.jac, &step).ok()?;
            let cos: f64 = tn.iter().zip(&t).map(|(a, b)| a * b).sum();
            (dist < 2.0 * ds && cos > 0.8).then_some((s, tn, dist))
        });
        let Some((nsol, tn, dist)) = next else {
            ds *= 0.5;
            if ds < settings.ds_min {
                branch.truncated = true;
                branch.stop_reason = "corrector failed at minimum step".into();
                break;
            }
            continue;
        };
        let cyc = sh.cycle(&nsol)?;
        if cyc.param < lo || cyc.param > hi {
            branch.stop_reason = "left parameter range".into();
            break;
        }
        let amp = cyc.v_max - cyc.v_min;
        if amp < settings.min_amplitude {
            branch.stop_reason = "amplitude collapsed (Hopf point)".into();
            break;
        }
        let (pd, po) = tests_of(&cyc);
        arc += dist;
        let prev = branch.points.last().unwrap();
        let (prev_pd, prev_po, prev_tp) = (prev.pd_test, prev.plus_one_test, prev.tangent_p);
        let fold = prev_tp.signum() != tn[n].signum();
        if prev_pd.signum() != pd.signum() {
            match locate_cycle(&sh, &sol.w, &nsol.w, BifKind::PD, settings) {
                Ok(b) if b.multiplier.is_some_and(|m| (m[0] + 1.0).abs() < CRITICAL_MULTIPLIER_TOL && m[1].abs() < CRITICAL_MULTIPLIER_TOL) => {
                    branch.bifurcations.push(b)
                }
                Ok(b) => branch.anomalies.push(b.param),
                Err(_) => branch.anomalies.push(cyc.param),
            }
        }
        if fold {
            match locate_cycle(&sh, &sol.w, &nsol.w, BifKind::LPC, settings) {
                Ok(b) if b.multiplier.is_some_and(|m| (m[0] - 1.0).abs() < CRITICAL_MULTIPLIER_TOL && m[1].abs() < CRITICAL_MULTIPLIER_TOL) => {
                    branch.bifurcations.push(b)
                }
                // A fold without a +1 multiplier is not a genuine LPC.
                Ok(b) => branch.anomalies.push(b.param),
                Err(_) => branch.anomalies.push(cyc.param),
            }
        } else if prev_po.signum() != po.signum() {
            branch.anomalies.push(cyc.param);
        }
        // In (T, p) the start is revisited when a loop closes.
        let back = arc > 100.0 * settings.ds_init
            && (cyc.param - p_start).abs() < 1e-5 * settings.p_scale.max(p_start.abs())
            && (cyc.period - period0).abs() < 1e-4 * period0;
        let too_long = cyc.period > settings.max_period_factor * period0;
        let new_level = (!section_ok(model, &sh.params(cyc.param), &cyc)).then(|| steep_level(model, &sh.params(cyc.param), &cyc));
        branch.points.push(CyclePoint { arclength: arc, cycle: cyc, pd_test: pd, plus_one_test: po, tangent_p: tn[n] });
        sol = nsol;
        t = tn;
        let merged = matches!(start, CycleStart::Switch(_)) && arc > 100.0 * settings.ds_init && {
            let c = &branch.points.last().unwrap().cycle;
            let half = flow(model, &sh.params(c.param), &c.x0, 0.5 * c.period, &settings.shooting.solver)?;
            scaled_norm(&half.iter().zip(&c.x0).map(|(a, b)| a - b).collect::<Vec<_>>(), settings.shooting.v_scale) < MERGE_TOL
        };
        if merged {
            branch.stop_reason = "merged into the period-one branch".into();
            break;
        }
        if back {
            branch.stop_reason = "returned to the starting cycle".into();
            break;
        }
        if too_long {
            branch.stop_reason = "period blow-up".into();
            break;
        }
        if let Some(level) = new_level {
            let pts = &branch.points;
            let last = &pts[pts.len() - 1].cycle;
            let before = &pts[pts.len() - 2].cycle;
            let cfg = &settings.shooting.solver;
            let x = reanchor(model, &sh.params(last.param), &last.x0, last.period, level, cfg)?;
            let xb = reanchor(model, &sh.params(before.param), &before.x0, before.period, level, cfg);
            let old_t = t_reorient(&t, n);
            sh.section_v = level;
            let w = sh.pack(&x, last.period, last.param);
            // Orientation from the previous point expressed on the new section.
            let d = match xb {
                Ok(xb) => {
                    let wb = sh.pack(&xb, before.period, before.param);
                    unit(&w.iter().zip(&wb).map(|(a, b)| a - b).collect::<Vec<_>>())
                }
                Err(_) => unit(&old_t),
            };
            sol = sh.correct(&w, &d, settings.shooting.max_newton)?;
            t = sh.tangent(&sol.jac, &d)?;
        }
        match sol.iters {
            0..=2 => ds = (ds * 1.5).min(settings.ds_max),
            3 => {}
            _ => ds = (ds * 0.6).max(settings.ds_min),
        }
    }
    Ok(branch)
}

fn max_upstroke_slope(model: &dyn CellModel, p: &ParameterSet, c: &LimitCycle) -> (f64, f64) {
    c.mesh.iter().fold((f64::NEG_INFINITY, c.section_v), |acc, x| {
        let fv = rhs_at(model, p, x)[0];
        if fv > acc.0 {
            (fv, x[0])
        } else {
            acc
        }
    })
}

/// The section degrades as the anchor approaches a tangency (dV/dt -> 0),
/// where the same orbit acquires a second nearby anchor.
fn section_ok(model: &dyn CellModel, p: &ParameterSet, c: &LimitCycle) -> bool {
    let (fmax, _) = max_upstroke_slope(model, p, c);
    rhs_at(model, p, &c.x0)[0] > SECTION_SLOPE_FRACTION * fmax
}

/// V at the steepest sampled point of the orbit.
fn steep_level(model: &dyn CellModel, p: &ParameterSet, c: &LimitCycle) -> f64 {
    max_upstroke_slope(model, p, c).1
}

/// After re-anchoring only the (T, p) components of the old tangent remain
/// meaningful for orientation.
fn t_reorient(t: &[f64], n: usize) -> Vec<f64> {
    let mut o = vec![0.0; n + 1];
    o[n - 1] = t[n - 1];
    o[n] = t[n];
    o
}

/// Localize a PD (multiplier -1) or LPC (fold in the parameter) between two
/// solved points by root-finding along their secant.
fn locate_cycle(sh: &Shooter, wa: &[f64], wb: &[f64], kind: BifKind, settings: &CycleContinuationSettings) -> Result<BifurcationPoint> {
    let n = sh.n();
    let d: Vec<f64> = wb.iter().zip(wa).map(|(b, a)| b - a).collect();
    let dir = unit(&d);
    let solve = |s: f64| -> Option<Solved> {
        let pred: Vec<f64> = wa.iter().zip(&d).map(|(a, di)| a + s * di).collect();
        sh.correct(&pred, &dir, settings.shooting.max_newton).ok()
    };
    let test = |s: f64| -> f64 {
        let Some(sol) = solve(s) else { return f64::NAN };
        match kind {
            BifKind::PD => {
                let (_, _, p) = sh.unpack(&sol.w);
                let ps = sh.params(p);
                let f_end = rhs_at(sh.model, &ps, &sol.fm.x_t);
                match section_multipliers(&sol.fm.m, &f_end) {
                    Ok(mu) => mu.iter().fold(Complex64::new(1.0, 0.0), |acc, m| acc * (m + 1.0)).re,
                    Err(_) => f64::NAN,
                }
            }
            _ => sh.tangent(&sol.jac, &dir).map(|t| t[n]).unwrap_or(f64::NAN),
        }
    };
    // Tangents are oriented along the secant so the fold test flips sign
    // exactly at the parameter extremum.
    let dp = d[n].abs() * sh.p_scale;
    let tol_s = (0.1 * settings.loc_tol / dp.max(1e-300)).clamp(1e-12, 1e-3);
    let s = polish_root(&test, 0.0, 1.0, tol_s);
    let sol = solve(s).ok_or_else(|| Error::Convergence { msg: "cycle bifurcation localization".into(), residual: f64::NAN })?;
    let c = sh.cycle(&sol)?;
    let target = if kind == BifKind::PD { -1.0 } else { 1.0 };
    let crit = c
        .nontrivial
        .iter()
        .min_by(|a, b| (*a - target).norm().total_cmp(&(*b - target).norm()))
        .copied()
        .unwrap_or(Complex64::new(f64::NAN, 0.0));
    let (pd, _) = tests_of(&c);
    Ok(BifurcationPoint {
        kind,
        param: c.param,
        state: c.x0.clone(),
        test_residual: if kind == BifKind::PD { pd } else { test(s) },
        criticality: None,
        omega0: None,
        multiplier: Some([crit.re, crit.im]),
        period: Some(c.period),
    })
}

/// Initial data for the period-doubled branch at a PD point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdSwitch {
    pub param: f64,
    /// Anchor of the parent cycle (on its section).
    pub anchor: Vec<f64>,
    /// Doubled period.
    pub period: f64,
    /// Critical eigenvector projected onto the section (unscaled state units).
    pub eigenvector: Vec<f64>,
    /// Perturbation amplitude in the scaled unknowns.
    pub amplitude: f64,
    /// Guess for `find_limit_cycle`: anchor + amplitude · eigenvector.
    pub guess: Vec<f64>,
    pub multiplier: f64,
}

impl PdSwitch {
    /// Switching direction in the scaled unknowns (gates only).
    fn direction_scaled(&self) -> Vec<f64> {
        let mut d = self.eigenvector[1..].to_vec();
        d.push(0.0);
        d.push(0.0);
        d
    }
}

/// Branch-switching data at a period-doubling point of a cycle branch.
pub fn branch_switch_pd(model: &dyn CellModel, params: &ParameterSet, param: &str, pd: &BifurcationPoint, s: &ShootingSettings) -> Result<PdSwitch> {
    let idx = params.resolve(param)?;
    let period = pd.period.ok_or_else(|| Error::Precondition("bifurcation point carries no period".into()))?;
    let mut ps = params.clone();
    ps.set_at(idx, pd.param);
    let fm = flow_map(model, &ps, None, &pd.state, period, s)?;
    let f_end = rhs_at(model, &ps, &fm.x_t);
    let n = model.dim();
    // Return-map Jacobian on the section and its -1 eigenvector.
    let red = DMatrix::from_fn(n - 1, n - 1, |i, j| fm.m[(i + 1, j + 1)] - f_end[i + 1] * fm.m[(0, j + 1)] / f_end[0]);
    let mu = linalg::eigenvalues(&red)?;
    let crit = mu
        .iter()
        .filter(|z| z.im.abs() < 1e-8)
        .min_by(|a, b| (a.re + 1.0).abs().total_cmp(&(b.re + 1.0).abs()))
        .copied();
    let Some(crit) = crit.filter(|z| (z.re + 1.0).abs() < 1e-3) else {
        return Err(Error::Precondition(format!(
            "no real multiplier within 1e-3 of -1 at {} = {} (nearest {:?})",
            params.names()[idx],
            pd.param,
            crit.map(|z| z.re)
        )));
    };
    let a = &red + DMatrix::<f64>::identity(n - 1, n - 1) * 1.0;
    let (v, smin) = linalg::null_vector(&a)?;
    if !(smin < 1e-2 * a.norm().max(1e-300)) && !(smin.is_finite()) {
        return Err(Error::Precondition("ill-conditioned -1 eigenvector".into()));
    }
    let mut ev = vec![0.0];
    ev.extend(v);
    let amplitude = 1e-3;
    let guess: Vec<f64> = pd.state.iter().zip(&ev).map(|(x, e)| x + amplitude * e).collect();
    Ok(PdSwitch { param: pd.param, anchor: pd.state.clone(), period: 2.0 * period, eigenvector: ev, amplitude, guess, multiplier: crit.re })
}

/// Re-express the cycle so the anchor's V is `level` (on an upstroke).
pub fn reanchor_cycle(model: &dyn CellModel, p: &ParameterSet, lc: &LimitCycle, level: f64, s: &ShootingSettings) -> Result<LimitCycle> {
    let x = reanchor(model, p, &lc.x0, lc.period, level, &s.solver)?;
    let mut c = find_limit_cycle(model, p, (&x, lc.period), s)?;
    c.param = lc.param;
    Ok(c)
}

/// Section multipliers of a fixed matrix, for tests.
#[cfg(test)]
fn mults(m: &DMatrix<f64>, f: &[f64]) -> Vec<Complex64> {
    section_multipliers(m, f).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::noble::{Noble, G_L, REST_STATE};

    fn noble_at(gl: f64) -> (Noble, ParameterSet) {
        let m = Noble::new();
        let mut p = m.default_params();
        p.set_at(G_L, gl);
        (m, p)
    }

    fn noble_cycle(gl: f64) -> LimitCycle {
        let (m, p) = noble_at(gl);
        let cfg = SolverConfig::default();
        let (x, t) = guess_from_simulation(&m, &p, &REST_STATE, 5000.0, &cfg).unwrap();
        let mut c = find_limit_cycle(&m, &p, (&x, t), &ShootingSettings::default()).unwrap();
        c.param = gl;
        c
    }

    #[test]
    fn noble_periods_by_shooting() {
        for (gl, t) in [(0.075, 564.1345), (0.0, 839.5015), (0.18, 324.2749)] {
            let c = noble_cycle(gl);
            assert!((c.period - t).abs() < 1.0, "G_L={gl}: T={}", c.period);
            assert!((c.trivial - 1.0).abs() < 1e-4, "trivial {}", c.trivial);
            assert!(c.stable);
        }
    }

    #[test]
    fn monodromy_matches_finite_differences() {
        let (m, p) = noble_at(0.075);
        let c = noble_cycle(0.075);
        let s = ShootingSettings::default();
        let fm = flow_map(&m, &p, Some(G_L), &c.x0, c.period, &s).unwrap();
        let cfg = SolverConfig::default();
        for j in 0..4 {
            let h = if j == 0 { 1e-5 } else { 1e-6 };
            let mut xp = c.x0.clone();
            xp[j] += h;
            let mut xm = c.x0.clone();
            xm[j] -= h;
            let fp = flow(&m, &p, &xp, c.period, &cfg).unwrap();
            let fmn = flow(&m, &p, &xm, c.period, &cfg).unwrap();
            for i in 0..4 {
                let fd = (fp[i] - fmn[i]) / (2.0 * h);
                assert!((fd - fm.m[(i, j)]).abs() < 1e-4 * (1.0 + fd.abs()), "M[{i},{j}] {} vs {fd}", fm.m[(i, j)]);
            }
        }
        // Parameter sensitivity.
        let dp = 1e-7;
        let mut pp = p.clone();
        pp.set_at(G_L, 0.075 + dp);
        let mut pm = p.clone();
        pm.set_at(G_L, 0.075 - dp);
        let fp = flow(&m, &pp, &c.x0, c.period, &cfg).unwrap();
        let fmn = flow(&m, &pm, &c.x0, c.period, &cfg).unwrap();
        let z = fm.dp.unwrap();
        for i in 0..4 {
            let fd = (fp[i] - fmn[i]) / (2.0 * dp);
            assert!((fd - z[i]).abs() < 1e-3 * (1.0 + fd.abs()), "dp[{i}] {} vs {fd}", z[i]);
        }
    }

    #[test]
    fn returns_to_anchor_at_tighter_tolerance() {
        let (m, p) = noble_at(0.075);
        let c = noble_cycle(0.075);
        let mut tight = SolverConfig::default();
        tight.rtol = 1e-12;
        tight.atol_v = 1e-13;
        tight.atol_gate = 1e-15;
        let x = flow(&m, &p, &c.x0, c.period, &tight).unwrap();
        let r: Vec<f64> = x.iter().zip(&c.x0).map(|(a, b)| a - b).collect();
        assert!(scaled_norm(&r, 100.0) < 1e-7, "{r:?}");
    }

    #[test]
    fn multipliers_do_not_depend_on_anchor() {
        let (m, p) = noble_at(0.075);
        let c = noble_cycle(0.075);
        let s = ShootingSettings::default();
        let c2 = reanchor_cycle(&m, &p, &c, -20.0, &s).unwrap();
        let mut a: Vec<f64> = c.nontrivial.iter().map(|z| z.norm()).collect();
        let mut b: Vec<f64> = c2.nontrivial.iter().map(|z| z.norm()).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6 * (1.0 + x), "{a:?} vs {b:?}");
        }
        assert!((c.period - c2.period).abs() < 1e-6);
    }

    #[test]
    fn section_multipliers_drop_the_flow_direction() {
        // M with a known trivial direction f = e0: eigen {1, 0.5, -0.2}.
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.0, 0.5, 0.0, 0.0, 0.0, -0.2]);
        let mut mu: Vec<f64> = mults(&m, &[1.0, 0.0, 0.0]).iter().map(|z| z.re).collect();
        mu.sort_by(f64::total_cmp);
        assert!((mu[0] + 0.2).abs() < 1e-14 && (mu[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn trivial_multiplier_survives_a_fold() {
        // Section map with a near-Jordan block at 1: its eigenvalues are
        // 1 ± 1e-4, so the spectrum alone cannot separate the trivial one.
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.0, 1.0, 1.0, 0.0, 1e-8, 1.0]);
        let (_, nontrivial, trivial) = floquet(&m, &[1.0, 0.0, 0.0]).unwrap();
        assert!((trivial - 1.0).abs() < 1e-12, "{trivial}");
        assert!(nontrivial.iter().all(|z| (z.re - 1.0).abs() > 5e-5));
    }

    #[test]
    fn pd_switch_rejects_non_pd_point() {
        let (m, p) = noble_at(0.075);
        let c = noble_cycle(0.075);
        let b = BifurcationPoint {
            kind: BifKind::PD,
            param: 0.075,
            state: c.x0.clone(),
            test_residual: 0.0,
            criticality: None,
            omega0: None,
            multiplier: None,
            period: Some(c.period),
        };
        let e = branch_switch_pd(&m, &p, "G_L", &b, &ShootingSettings::default()).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    #[test]
    fn noble_gl_branch_structure() {
        let (m, p) = noble_at(0.15);
        let c = noble_cycle(0.15);
        let s = CycleContinuationSettings::default();
        let b = continue_limit_cycles(&m, &p, "G_L", CycleStart::Cycle { cycle: &c, direction: 1.0 }, (0.0, 0.21), &s).unwrap();
        assert!(b.stop_reason.contains("Hopf"), "{}", b.stop_reason);
        let lpc = b.of_kind(BifKind::LPC);
        let pd = b.of_kind(BifKind::PD);
        assert!(lpc.iter().any(|q| (q.param - 0.193546).abs() < 1e-4));
        assert!(pd.iter().any(|q| (q.param - 0.187785).abs() < 1e-4));
        // Stable before the fold, unstable just after it.
        let first_unstable = b.points.iter().position(|q| !q.cycle.stable).unwrap();
        assert!(b.points[..first_unstable].iter().all(|q| q.cycle.param <= 0.193547));
        for q in &b.points {
            assert!((q.cycle.trivial - 1.0).abs() < 1e-4, "trivial {} at {}", q.cycle.trivial, q.cycle.param);
        }
        let csv = b.to_csv();
        assert!(csv.starts_with("param,V_min,V_max,T,stability\n"));
        assert_eq!(csv.lines().count(), b.points.len() + 1);
        let v: serde_json::Value = serde_json::from_str(&b.to_json()).unwrap();
        assert_eq!(v["bifurcations"].as_array().unwrap().len(), b.bifurcations.len());
    }

    #[test]
    fn degenerate_period_is_rejected() {
        let (m, p) = noble_at(0.075);
        let e = find_limit_cycle(&m, &p, (&REST_STATE, 0.5), &ShootingSettings::default()).unwrap_err();
        assert!(matches!(e, Error::DegenerateCycle(_)));
    }
}
