//! Pseudo-arclength continuation of equilibrium branches with Hopf and
//! limit-point detection, localization and empirical criticality.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibria::{self, EquilibriumPoint, DEFAULT_RANGE};
use crate::error::{Error, Result};
use crate::integrator::{polish_root, CellSystem, Control, OdeSystem, Radau5, SolverConfig};
use crate::linalg::{DenseLu, to_row_major};
use crate::model::{analytic_jacobian, steady_state_at, CellModel, ParameterSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BifKind {
    Hopf,
    LP,
    PD,
    LPC,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Supercritical,
    Subcritical,
    Undetermined,
}

/// A located zero of a bifurcation test function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub kind: BifKind,
    pub param: f64,
    pub state: Vec<f64>,
    /// Test-function value at the reported point.
    pub test_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criticality: Option<Criticality>,
    /// Angular frequency (rad/ms) of the critical pair, Hopf only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    /// Critical Floquet multiplier (re, im), PD/LPC only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<[f64; 2]>,
    /// Cycle period at the point, PD/LPC only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuationSettings {
    pub ds_init: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// V is divided by this before entering the arclength norm.
    pub v_scale: f64,
    pub max_points: usize,
    /// Corrector tolerance on the reduced residual (mV/ms).
    pub corrector_tol: f64,
    pub max_newton: usize,
    /// Localization tolerance in the parameter.
    pub loc_tol: f64,
    /// Run the criticality probe on each Hopf point.
    pub classify: bool,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            ds_init: 1e-3,
            ds_min: 1e-8,
            ds_max: 1e-2,
            v_scale: 100.0,
            max_points: 20_000,
            corrector_tol: 1e-12,
            max_newton: 10,
            loc_tol: 1e-7,
            classify: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchPoint {
    pub arclength: f64,
    pub point: EquilibriumPoint,
    /// Bialternate-product Hopf test Π_{i<j} (λi + λj).
    pub hopf_test: f64,
    /// Fold test a_n.
    pub fold_test: f64,
}

/// An equilibrium branch in one parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Branch {
    pub model: String,
    pub param_name: String,
    pub points: Vec<BranchPoint>,
    pub bifurcations: Vec<BifurcationPoint>,
    pub settings: ContinuationSettings,
    /// Set when the corrector failed at the minimum step.
    pub truncated: bool,
}

impl Branch {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("branch serializes")
    }

    /// CSV projection `param,V_inf,stability`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("param,V_inf,stability\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.point.param, p.point.v(), p.point.stability.as_str()));
        }
        s
    }

    pub fn of_kind(&self, kind: BifKind) -> Vec<&BifurcationPoint> {
        self.bifurcations.iter().filter(|b| b.kind == kind).collect()
    }
}

/// Π_{i<j} (λi + λj): zero when a pair sums to zero (Hopf or neutral saddle).
pub fn bialternate_test(eigs: &[Complex64]) -> f64 {
    let mut prod = Complex64::new(1.0, 0.0);
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            prod *= eigs[i] + eigs[j];
        }
    }
    prod.re
}

/// Reduced-curve geometry: u = V / v_scale and the parameter p.
struct Curve<'a> {
    model: &'a dyn CellModel,
    base: ParameterSet,
    idx: usize,
    v_scale: f64,
}

impl Curve<'_> {
    fn params(&self, p: f64) -> ParameterSet {
        let mut ps = self.base.clone();
        ps.set_at(self.idx, p);
        ps
    }

    fn g(&self, x: [f64; 2]) -> f64 {
        equilibria::reduced_residual(self.model, &self.params(x[1]), x[0] * self.v_scale)
    }

    fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        let ps = self.params(x[1]);
        let gu = equilibria::reduced_slope(self.model, &ps, x[0] * self.v_scale) * self.v_scale;
        let h = 1e-7 * (1.0 + x[1].abs());
        let gp = (self.g([x[0], x[1] + h]) - self.g([x[0], x[1] - h])) / (2.0 * h);
        [gu, gp]
    }

    fn tangent(&self, x: [f64; 2], prev: [f64; 2]) -> [f64; 2] {
        let [gu, gp] = self.grad(x);
        let n = gu.hypot(gp);
        let mut t = [gp / n, -gu / n];
        if t[0] * prev[0] + t[1] * prev[1] < 0.0 {
            t = [-t[0], -t[1]];
        }
        t
    }

    /// Newton on [g = 0; d·(x - x_pred) = 0]. Returns (x, iterations).
    fn correct(&self, pred: [f64; 2], d: [f64; 2], tol: f64, max_it: usize) -> Option<([f64; 2], usize)> {
        let mut x = pred;
        for it in 1..=max_it {
            let g = self.g(x);
            if !g.is_finite() {
                return None;
            }
            let [gu, gp] = self.grad(x);
            let c = d[0] * (x[0] - pred[0]) + d[1] * (x[1] - pred[1]);
            let det = gu * d[1] - gp * d[0];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let du = (-g * d[1] + c * gp) / det;
            let dp = (-gu * c + d[0] * g) / det;
            x = [x[0] + du, x[1] + dp];
            let step = du.abs().max(dp.abs());
            if step < 1e-13 && self.g(x).abs() < tol {
                return Some((x, it));
            }
            if self.g(x).abs() < tol * 1e-2 && step < 1e-10 {
                return Some((x, it));
            }
        }
        (self.g(x).abs() < tol).then_some((x, max_it))
    }

    fn point(&self, x: [f64; 2]) -> Result<(EquilibriumPoint, f64, f64)> {
        let ps = self.params(x[1]);
        let s = steady_state_at(self.model, x[0] * self.v_scale, &ps);
        let e = equilibria::analyze(self.model, &ps, &s, x[1])?;
        let h = bialternate_test(&e.eigenvalues);
        let f = equilibria::fold_test(&e.char_coeffs);
        Ok((e, h, f))
    }
}

/// Trace the equilibrium branch through `start` while the parameter stays
/// within `range`. The run heads from `range.0` towards `range.1`.
pub fn continue_equilibria(
    model: &dyn CellModel,
    params: &ParameterSet,
    param: &str,
    range: (f64, f64),
    start: &EquilibriumPoint,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    let idx = params.resolve(param)?;
    let curve = Curve { model, base: params.clone(), idx, v_scale: settings.v_scale };
    let (lo, hi) = (range.0.min(range.1), range.0.max(range.1));
    let dir = if range.1 >= range.0 { 1.0 } else { -1.0 };
    let p0 = if start.param.is_nan() { params.at(idx) } else { start.param };
    let mut x = [start.v() / settings.v_scale, p0];
    // Snap the start onto the curve at fixed parameter.
    x = curve
        .correct(x, [0.0, 1.0], settings.corrector_tol, 50)
        .map(|(x, _)| x)
        .ok_or_else(|| Error::Convergence { msg: "start point is not an equilibrium".into(), residual: curve.g(x).abs() })?;
    let mut t = curve.tangent(x, [0.0, dir]);
    if t[1] * dir < 0.0 || (t[1] == 0.0) {
        t = [-t[0], -t[1]];
    }
    let mut branch = Branch {
        model: model.name().to_string(),
        param_name: params.names()[idx].clone(),
        points: Vec::new(),
        bifurcations: Vec::new(),
        settings: settings.clone(),
        truncated: false,
    };
    let (e, hopf, fold) = curve.point(x)?;
    branch.points.push(BranchPoint { arclength: 0.0, point: e, hopf_test: hopf, fold_test: fold });
    let mut ds = settings.ds_init;
    let mut s_arc = 0.0;
    while branch.points.len() < settings.max_points {
        let pred = [x[0] + ds * t[0], x[1] + ds * t[1]];
        let res = curve.correct(pred, t, settings.corrector_tol, settings.max_newton);
        let accepted = res.and_then(|(xn, it)| {
            let dist = ((xn[0] - x[0]).powi(2) + (xn[1] - x[1]).powi(2)).sqrt();
            let tn = curve.tangent(xn, t);
            let cos = tn[0] * t[0] + tn[1] * t[1];
            (dist < 2.0 * ds && cos > 0.9).then_some((xn, it, tn, dist))
        });
        let Some((xn, it, tn, dist)) = accepted else {
            ds *= 0.5;
            if ds < settings.ds_min {
                branch.truncated = true;
                break;
            }
            continue;
        };
        if xn[1] < lo || xn[1] > hi || xn[0] * settings.v_scale < DEFAULT_RANGE.0 || xn[0] * settings.v_scale > DEFAULT_RANGE.1 {
            break;
        }
        let (e, hopf, fold) = curve.point(xn)?;
        s_arc += dist;
        let prev = branch.points.last().unwrap().clone();
        let bp = BranchPoint { arclength: s_arc, point: e, hopf_test: hopf, fold_test: fold };
        if prev.hopf_test.signum() != hopf.signum() && prev.hopf_test != 0.0 {
            if let Some(b) = locate(&curve, x, xn, BifKind::Hopf, settings)? {
                branch.bifurcations.push(b);
            }
        }
        if prev.fold_test.signum() != fold.signum() && prev.fold_test != 0.0 {
            if let Some(b) = locate(&curve, x, xn, BifKind::LP, settings)? {
                branch.bifurcations.push(b);
            }
        }
        branch.points.push(bp);
        x = xn;
        t = tn;
        if it <= 3 {
            ds = (ds * 1.5).min(settings.ds_max);
        } else if it >= 6 {
            ds = (ds * 0.6).max(settings.ds_min);
        }
    }
    if settings.classify {
        for b in branch.bifurcations.iter_mut().filter(|b| b.kind == BifKind::Hopf) {
            b.criticality = Some(classify_hopf(model, params, param, b, &HopfProbe::default()).unwrap_or(Criticality::Undetermined));
        }
    }
    Ok(branch)
}

/// Localize a sign change of the Hopf or fold test between two branch
/// points. Returns `None` for a neutral saddle (real pair summing to zero).
fn locate(curve: &Curve, xa: [f64; 2], xb: [f64; 2], kind: BifKind, settings: &ContinuationSettings) -> Result<Option<BifurcationPoint>> {
    let d = [xb[0] - xa[0], xb[1] - xa[1]];
    let len = d[0].hypot(d[1]);
    let dir = [d[0] / len, d[1] / len];
    let at = |s: f64| -> Option<[f64; 2]> {
        let pred = [xa[0] + s * d[0], xa[1] + s * d[1]];
        curve.correct(pred, dir, settings.corrector_tol, 30).map(|r| r.0)
    };
    let test = |s: f64| -> f64 {
        match at(s).and_then(|x| curve.point(x).ok()) {
            Some((_, h, f)) => {
                if kind == BifKind::Hopf {
                    h
                } else {
                    f
                }
            }
            None => f64::NAN,
        }
    };
    // Parameter tolerance translated to the secant coordinate.
    let scale = d[1].abs().max(1e-300);
    let tol_s = (0.1 * settings.loc_tol / scale).min(1e-3).max(1e-15);
    let s = polish_root(&test, 0.0, 1.0, tol_s);
    let x = at(s).ok_or_else(|| Error::Convergence { msg: "bifurcation localization".into(), residual: f64::NAN })?;
    let (e, h, f) = curve.point(x)?;
    let jn = analytic_jacobian(curve.model, &e.state, &curve.params(x[1]))?.norm();
    match kind {
        BifKind::Hopf => {
            let pair = e
                .eigenvalues
                .iter()
                .filter(|z| z.im > 1e-10)
                .min_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
                .copied();
            let Some(z) = pair else { return Ok(None) };
            if z.re.abs() > 1e-6 {
                return Ok(None);
            }
            Ok(Some(BifurcationPoint {
                kind,
                param: x[1],
                state: e.state.clone(),
                test_residual: h,
                criticality: None,
                omega0: Some(z.im),
                multiplier: None,
                period: None,
            }))
        }
        _ => {
            let smallest = e.eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
            if smallest > 1e-6 * jn.max(1.0) {
                return Ok(None);
            }
            Ok(Some(BifurcationPoint {
                kind,
                param: x[1],
                state: e.state.clone(),
                test_residual: f,
                criticality: None,
                omega0: None,
                multiplier: None,
                period: None,
            }))
        }
    }
}

/// Settings of the empirical criticality probe.
#[derive(Clone, Debug)]
pub struct HopfProbe {
    /// Parameter offset relative to |param|.
    pub offset_rel: f64,
    /// Initial perturbation relative to |V_eq|.
    pub perturbation_rel: f64,
    /// Oscillation cycles integrated per side.
    pub cycles: usize,
    pub solver: SolverConfig,
}

impl Default for HopfProbe {
    fn default() -> Self {
        HopfProbe { offset_rel: 1e-3, perturbation_rel: 1e-3, cycles: 40, solver: SolverConfig::default() }
    }
}

/// Complex eigenvector of `j` for the eigenvalue near `lambda`, by inverse iteration.
pub fn complex_eigenvector(j: &DMatrix<f64>, lambda: Complex64) -> Result<Vec<Complex64>> {
    let n = j.nrows();
    let shift = lambda + Complex64::new(1e-10 * (1.0 + lambda.norm()), 1e-10 * (1.0 + lambda.norm()));
    let mut a: Vec<Complex64> = to_row_major(j).into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    for i in 0..n {
        a[i * n + i] -= shift;
    }
    let lu = DenseLu::factor(n, a)?;
    let mut w: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + 0.1 * i as f64, 0.3 - 0.05 * i as f64)).collect();
    for _ in 0..4 {
        lu.solve(&mut w);
        let nrm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::Convergence { msg: "inverse iteration".into(), residual: nrm });
        }
        for z in w.iter_mut() {
            *z /= nrm;
        }
    }
    Ok(w)
}

/// Nonlinear excess of the envelope growth rate: the measured log-rate of
/// the oscillation amplitude of component `comp` minus the linear rate
/// `re_lambda`. Negative excess means the nonlinearity saturates growth.
pub fn envelope_excess<S: OdeSystem>(
    sys: &S,
    x0: &[f64],
    comp: usize,
    re_lambda: f64,
    omega: f64,
    cycles: usize,
    cfg: &SolverConfig,
) -> Result<f64> {
    let period = 2.0 * std::f64::consts::PI / omega;
    let t_end = period * cycles as f64;
    let mut y = x0.to_vec();
    let mut opts = cfg.radau(cfg.atol_for(sys.dim(), 1).into_iter().take(sys.dim()).collect());
    opts.h_max = period / 20.0;
    let mut solver = Radau5::new(sys, &opts)?;
    // Extrema of the component, located from sign changes of its slope
    // sampled on the dense output.
    let mut extrema: Vec<(f64, f64)> = Vec::new();
    let dt = period / 200.0;
    let mut next = 0.0;
    let mut hist: Vec<(f64, f64)> = Vec::new();
    solver.integrate(0.0, &mut y, t_end, &mut |v| {
        while next <= v.t {
            hist.push((next, v.eval_comp(next, comp)));
            let k = hist.len();
            if k >= 3 {
                let (a, b, c) = (hist[k - 3].1, hist[k - 2].1, hist[k - 1].1);
                if (b > a && b >= c) || (b < a && b <= c) {
                    // Parabolic refinement of the extremum value.
                    let den = a - 2.0 * b + c;
                    let off = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
                    let val = b - 0.25 * (a - c) * off;
                    extrema.push((hist[k - 2].0 + off * dt, val));
                }
            }
            next += dt;
        }
        Control::Continue
    })?;
    // Half peak-to-trough amplitudes from consecutive extrema pairs.
    let amps: Vec<(f64, f64)> = extrema
        .windows(2)
        .map(|w| (0.5 * (w[0].0 + w[1].0), 0.5 * (w[0].1 - w[1].1).abs()))
        .filter(|(_, a)| *a > 0.0)
        .collect();
    let skip = amps.len() / 8;
    let pts = &amps[skip.max(2).min(amps.len())..];
    if pts.len() < 6 {
        return Err(Error::Convergence { msg: "too few oscillation extrema in probe".into(), residual: pts.len() as f64 });
    }
    let n = pts.len() as f64;
    let (mt, ml) = pts.iter().fold((0.0, 0.0), |acc, (t, a)| (acc.0 + t / n, acc.1 + a.ln() / n));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, a) in pts {
        sxy += (t - mt) * (a.ln() - ml);
        sxx += (t - mt) * (t - mt);
    }
    Ok(sxy / sxx - re_lambda)
}

/// Empirical criticality of a located Hopf point: on each side of it the
/// equilibrium is perturbed along the critical eigenvector and the envelope
/// growth is compared with the linear rate. Saturation on both sides means
/// supercritical; amplification on both sides means subcritical.
pub fn classify_hopf(model: &dyn CellModel, params: &ParameterSet, param: &str, hopf: &BifurcationPoint, probe: &HopfProbe) -> Result<Criticality> {
    let idx = params.resolve(param)?;
    let offset = probe.offset_rel * hopf.param.abs().max(1e-12);
    let mut excess = Vec::new();
    for side in [-1.0, 1.0] {
        let mut ps = params.clone();
        ps.set_at(idx, hopf.param + side * offset);
        let eq = equilibria::find_equilibrium_near(model, &ps, hopf.state[0])?;
        let j = analytic_jacobian(model, &eq.state, &ps)?;
        let Some(lam) = eq.eigenvalues.iter().filter(|z| z.im > 1e-10).min_by(|a, b| a.re.abs().total_cmp(&b.re.abs())).copied() else {
            return Ok(Criticality::Undetermined);
        };
        let w = complex_eigenvector(&j, lam)?;
        let rot = w[0].conj() / w[0].norm();
        let dir: Vec<f64> = w.iter().map(|z| (z * rot).re).collect();
        let r0 = probe.perturbation_rel * eq.v().abs().max(1.0);
        let x0: Vec<f64> = eq.state.iter().zip(&dir).map(|(x, d)| x + r0 * d / dir[0]).collect();
        let sys = CellSystem::new(model, &ps);
        match envelope_excess(&sys, &x0, 0, lam.re, lam.im, probe.cycles, &probe.solver) {
            Ok(e) => excess.push(e),
            Err(e) if e.is_numerical() => return Ok(Criticality::Undetermined),
            Err(e) => return Err(e),
        }
    }
    let noise = 1e-3 * excess.iter().map(|e| e.abs()).fold(0.0, f64::max);
    Ok(if excess.iter().all(|e| *e < -noise) {
        Criticality::Supercritical
    } else if excess.iter().all(|e| *e > noise) {
        Criticality::Subcritical
    } else {
        Criticality::Undetermined
    })
}

/// Convenience: equilibrium at the start of `range` (lowest-V root) and the branch from it.
pub fn continue_from_rest(
    model: &dyn CellModel,
    params: &ParameterSet,
    param: &str,
    range: (f64, f64),
    settings: &ContinuationSettings,
) -> Result<Branch> {
    let idx = params.resolve(param)?;
    let mut ps = params.clone();
    ps.set_at(idx, range.0);
    let mut start = equilibria::find_rest(model, &ps)?;
    start.param = range.0;
    continue_equilibria(model, &ps, param, range, &start, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::JacMatrix;
    use crate::model::noble::Noble;

    /// Hopf normal form with cubic coefficient `l1`.
    struct NormalForm {
        mu: f64,
        l1: f64,
    }
    impl OdeSystem for NormalForm {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            let r2 = y[0] * y[0] + y[1] * y[1];
            dy[0] = self.mu * y[0] - y[1] + self.l1 * y[0] * r2;
            dy[1] = y[0] + self.mu * y[1] + self.l1 * y[1] * r2;
        }
        fn jacobian(&self, _t: f64, y: &[f64], j: &mut JacMatrix) {
            if let JacMatrix::Dense(d) = j {
                let r2 = y[0] * y[0] + y[1] * y[1];
                d[0] = self.mu + self.l1 * (r2 + 2.0 * y[0] * y[0]);
                d[1] = -1.0 + 2.0 * self.l1 * y[0] * y[1];
                d[2] = 1.0 + 2.0 * self.l1 * y[0] * y[1];
                d[3] = self.mu + self.l1 * (r2 + 2.0 * y[1] * y[1]);
            }
        }
    }

    #[test]
    fn normal_form_excess_sign_follows_cubic_coefficient() {
        let cfg = SolverConfig::default();
        for (l1, sign) in [(-1.0, -1.0), (1.0, 1.0)] {
            for mu in [-1e-3, 1e-3] {
                let sys = NormalForm { mu, l1 };
                let e = envelope_excess(&sys, &[0.03, 0.0], 0, mu, 1.0, 20, &cfg).unwrap();
                assert!(e * sign > 0.0, "l1={l1} mu={mu} excess={e}");
                // Leading-order excess is l1 r^2, r drifting slowly from 0.03.
                let ratio = e / (l1 * 9e-4);
                assert!((0.7..1.5).contains(&ratio), "{e}");
            }
        }
    }

    #[test]
    fn bialternate_vanishes_on_imaginary_pair() {
        let e = [Complex64::new(0.0, 2.0), Complex64::new(0.0, -2.0), Complex64::new(-1.0, 0.0)];
        assert_eq!(bialternate_test(&e), 0.0);
        let e = [Complex64::new(0.1, 2.0), Complex64::new(0.1, -2.0), Complex64::new(-1.0, 0.0)];
        assert!(bialternate_test(&e) != 0.0);
    }

    #[test]
    fn noble_gl_branch_has_supercritical_hopf() {
        let m = Noble::new();
        let p = m.default_params();
        let b = continue_from_rest(&m, &p, "G_L", (0.0, 0.3), &ContinuationSettings::default()).unwrap();
        let h = b.of_kind(BifKind::Hopf);
        assert_eq!(h.len(), 1, "{:?}", b.bifurcations);
        assert!((h[0].param - 0.200883).abs() < 1e-3, "{}", h[0].param);
        assert_eq!(h[0].criticality, Some(Criticality::Supercritical));
        assert!(b.points.iter().all(|p| p.point.residual < 1e-10));
        // Downward run from the other end finds the same point.
        let mut s = ContinuationSettings::default();
        s.classify = false;
        let down = continue_from_rest(&m, &p, "G_L", (0.3, 0.0), &s).unwrap();
        let hd = down.of_kind(BifKind::Hopf);
        assert_eq!(hd.len(), 1);
        assert!((hd[0].param - h[0].param).abs() < 2.0 * s.loc_tol);
        assert!(down.points.windows(2).all(|w| w[1].arclength > w[0].arclength));
    }
}
