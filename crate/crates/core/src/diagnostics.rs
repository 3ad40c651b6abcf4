//! Trajectory measurements: period, action-potential metrics, EAD counts
//! and the largest Lyapunov exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{drive, find_crossings, CellSystem, Control, Direction, SolverConfig, Stimulated, StimulusProtocol, Trajectory};
use crate::model::{CellModel, ParameterSet};

/// Header of the per-run metrics CSV.
pub const METRICS_HEADER: &str = "run_id,T,V_max,V_min,APD90,EAD_count,lambda1,verdict";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodSettings {
    /// Fraction of the time span dropped as transient.
    pub discard: f64,
    /// Largest accepted (max - min) / median of crossing spacings.
    pub max_spread: f64,
    /// Recurrence tolerance on the scaled state after one period.
    pub recurrence_tol: f64,
    pub v_scale: f64,
}

impl Default for PeriodSettings {
    fn default() -> Self {
        PeriodSettings { discard: 0.2, max_spread: 0.01, recurrence_tol: 1e-3, v_scale: 100.0 }
    }
}

/// State at time `t`, from dense output when present, else linear interpolation.
pub fn state_at(traj: &Trajectory, t: f64) -> Option<Vec<f64>> {
    let d = traj.dim();
    if traj.dense.is_some() {
        return (0..d).map(|i| traj.eval(t, i)).collect();
    }
    if traj.is_empty() || t < traj.t[0] || t > *traj.t.last()? {
        return None;
    }
    let k = traj.t.partition_point(|&s| s < t).max(1).min(traj.len() - 1);
    let (t0, t1) = (traj.t[k - 1], traj.t[k]);
    let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    let (a, b) = (traj.row(k - 1), traj.row(k));
    Some(a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect())
}

fn tail_start(traj: &Trajectory, discard: f64) -> usize {
    let (t0, t1) = (traj.t[0], *traj.t.last().unwrap());
    let ts = t0 + discard * (t1 - t0);
    traj.t.partition_point(|&t| t < ts)
}

fn v_range(traj: &Trajectory, from: usize) -> (f64, f64) {
    let d = traj.dim();
    traj.y[from * d..].iter().step_by(d).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Period of a settled oscillation, or `None` if the tail is not periodic.
pub fn measure_period(traj: &Trajectory, s: &PeriodSettings) -> Option<f64> {
    if traj.len() < 3 {
        return None;
    }
    let k0 = tail_start(traj, s.discard);
    let t_start = traj.t[k0.min(traj.len() - 1)];
    let (lo, hi) = v_range(traj, k0);
    if !(hi - lo > 1e-6) {
        return None;
    }
    let level = 0.5 * (lo + hi);
    let ups: Vec<f64> = find_crossings(traj, 0, level, Direction::Up).into_iter().filter(|&t| t >= t_start).collect();
    if ups.len() < 3 {
        return None;
    }
    let mut gaps: Vec<f64> = ups.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let median = if gaps.len() % 2 == 1 { gaps[gaps.len() / 2] } else { 0.5 * (gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2]) };
    if (gaps[gaps.len() - 1] - gaps[0]) / median > s.max_spread {
        return None;
    }
    // Recurrence of the full state one period after the first crossing.
    let a = state_at(traj, ups[0])?;
    let b = state_at(traj, ups[0] + median)?;
    let ok = a.iter().zip(&b).enumerate().all(|(i, (x, y))| {
        let scale = if i == 0 { s.v_scale } else { 1.0 };
        (x - y).abs() / scale < s.recurrence_tol
    });
    ok.then_some(median)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EadSettings {
    /// Minimum rise after a local minimum for an oscillation to count (mV).
    pub prominence: f64,
    /// Repolarization fraction closing the AP window (0.9 for APD90).
    pub repolarization: f64,
    /// A first minimum this soon after the peak (ms) is the early-repolarization
    /// notch of a spike-and-dome AP; the search then starts at the dome top.
    pub notch_window: f64,
}

impl Default for EadSettings {
    fn default() -> Self {
        EadSettings { prominence: 1.0, repolarization: 0.9, notch_window: 50.0 }
    }
}

/// One action potential cut out of a trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApWindow {
    pub t_up: f64,
    pub t_peak: f64,
    pub v_peak: f64,
    pub v_base: f64,
    /// Return below the repolarization level; `None` if it never returns.
    pub t_repol: Option<f64>,
    pub eads: usize,
}

impl ApWindow {
    pub fn apd(&self) -> Option<f64> {
        self.t_repol.map(|t| t - self.t_up)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApMetrics {
    pub period: Option<f64>,
    pub v_max: f64,
    pub v_min: f64,
    /// Mean APD over fully repolarized APs.
    pub apd: Option<f64>,
    pub aps: Vec<ApWindow>,
}

impl ApMetrics {
    /// Largest per-AP EAD count. APs that run into the next upstroke
    /// without repolarizing are not scored: their oscillations are the
    /// approach to another attractor, not afterdepolarizations.
    pub fn ead_count(&self) -> usize {
        self.aps.iter().filter(|a| a.t_repol.is_some()).map(|a| a.eads).max().unwrap_or(0)
    }
}

/// Rises of at least `prominence` after a local minimum, in a sample stream
/// that starts at a peak.
pub fn count_oscillations(v: &[f64], prominence: f64) -> usize {
    let mut count = 0;
    let mut rising = false;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in v {
        if rising {
            hi = hi.max(x);
            if x <= hi - prominence {
                rising = false;
                lo = x;
            }
        } else {
            lo = lo.min(x);
            if x >= lo + prominence {
                count += 1;
                rising = true;
                hi = x;
            }
        }
    }
    count
}

/// First (minimum, following maximum) turning pair with the given prominence.
fn first_turn(v: &[f64], prominence: f64) -> Option<(usize, usize)> {
    let mut kmin = 0;
    let mut i = 0;
    while i < v.len() {
        if v[i] < v[kmin] {
            kmin = i;
        }
        if v[i] >= v[kmin] + prominence {
            break;
        }
        i += 1;
    }
    if i == v.len() {
        return None;
    }
    let mut kmax = i;
    while i < v.len() && v[i] > v[kmax] - prominence {
        if v[i] > v[kmax] {
            kmax = i;
        }
        i += 1;
    }
    Some((kmin, kmax))
}

/// Segment a trajectory into APs and count EADs in each.
///
/// APs start at upward crossings of `threshold`. The base is the lowest V
/// over the preceding stretch, the window runs from the peak to the return
/// below base + (1 - repolarization)·(peak - base).
pub fn ap_windows(traj: &Trajectory, threshold: f64, s: &EadSettings) -> Vec<ApWindow> {
    let ups = find_crossings(traj, 0, threshold, Direction::Up);
    let v = traj.component(0);
    let t = &traj.t;
    let mut out = Vec::with_capacity(ups.len());
    let mut prev = t[0];
    for (n, &tu) in ups.iter().enumerate() {
        let next = ups.get(n + 1).copied().unwrap_or(f64::INFINITY);
        let a = t.partition_point(|&x| x < tu);
        let b = t.partition_point(|&x| x < next);
        let p0 = t.partition_point(|&x| x < prev);
        if a >= b || a == 0 {
            prev = tu;
            continue;
        }
        let v_base = v[p0..a].iter().copied().fold(f64::INFINITY, f64::min).min(threshold);
        // The peak is the AP maximum; EADs are searched after it.
        let (kp, v_peak) = (a..b).fold((a, f64::NEG_INFINITY), |acc, k| if v[k] > acc.1 { (k, v[k]) } else { acc });
        let level = v_base + (1.0 - s.repolarization) * (v_peak - v_base);
        let kr = (kp..b).find(|&k| v[k] < level);
        let t_repol = kr.map(|k| {
            let (t0, t1, v0, v1) = (t[k - 1], t[k], v[k - 1], v[k]);
            t0 + (level - v0) / (v1 - v0) * (t1 - t0)
        });
        let end = kr.unwrap_or(b);
        let mut start = kp;
        if let Some((kmin, kmax)) = first_turn(&v[kp..end], s.prominence) {
            if t[kp + kmin] - t[kp] < s.notch_window {
                start = kp + kmax;
            }
        }
        let eads = count_oscillations(&v[start..end], s.prominence);
        out.push(ApWindow { t_up: tu, t_peak: t[kp], v_peak, v_base, t_repol, eads });
        prev = tu;
    }
    out
}

/// Period, V range, APD and EAD counts of a trajectory. APs are detected at
/// the V midpoint of the post-transient range.
pub fn ap_metrics(traj: &Trajectory, ps: &PeriodSettings, es: &EadSettings) -> ApMetrics {
    let k0 = tail_start(traj, ps.discard);
    let (lo, hi) = v_range(traj, k0);
    let (lo_all, hi_all) = v_range(traj, 0);
    let threshold = if hi - lo > 1.0 { 0.5 * (lo + hi) } else { 0.5 * (lo_all + hi_all) };
    let aps = if hi_all - lo_all > 1.0 { ap_windows(traj, threshold, es) } else { Vec::new() };
    let apds: Vec<f64> = aps.iter().filter_map(|a| a.apd()).collect();
    ApMetrics {
        period: measure_period(traj, ps),
        v_max: hi,
        v_min: lo,
        apd: (!apds.is_empty()).then(|| apds.iter().sum::<f64>() / apds.len() as f64),
        aps,
    }
}

/// Coarse long-run regime of a trajectory tail.
pub fn regime(traj: &Trajectory, ps: &PeriodSettings) -> &'static str {
    let k0 = tail_start(traj, ps.discard);
    let (lo, hi) = v_range(traj, k0);
    if hi - lo < 0.1 {
        "equilibrium"
    } else if measure_period(traj, ps).is_some() {
        "periodic"
    } else {
        "aperiodic"
    }
}

// ----------------------------------------------------------------------------
// Lyapunov

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Chaotic,
    NonChaotic,
    Marginal,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Chaotic => "chaotic",
            Verdict::NonChaotic => "non-chaotic",
            Verdict::Marginal => "marginal",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSettings {
    pub horizon: f64,
    pub renorm_dt: f64,
    /// Initial separation in the scaled norm.
    pub delta0: f64,
    pub discard: f64,
    pub threshold: f64,
    /// Largest relative change of the running estimate over the last quarter
    /// for a chaotic verdict.
    pub max_drift: f64,
    pub v_scale: f64,
    /// Selects the initial perturbation direction.
    #[serde(default)]
    pub seed: u64,
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        LyapunovSettings {
            horizon: 50_000.0,
            renorm_dt: 10.0,
            delta0: 1e-8,
            discard: 0.1,
            threshold: 5e-4,
            max_drift: 0.2,
            v_scale: 100.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub lambda1: f64,
    /// Running estimate after each post-transient renormalization.
    pub series: Vec<f64>,
    pub horizon: f64,
    pub renorm_dt: f64,
    pub drift: f64,
    pub verdict: Verdict,
}

/// Deterministic unit perturbation direction in the scaled norm.
fn direction(n: usize, seed: u64) -> Vec<f64> {
    let phase = (seed % 1_000_003) as f64 * 0.754_877_666;
    let d: Vec<f64> = (0..n).map(|i| ((i + 1) as f64 * 1.618_033_988_75 + phase).sin()).collect();
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    d.into_iter().map(|x| x / norm).collect()
}

/// Benettin two-trajectory estimate for any stimulated system. `scale[i]`
/// divides component i in the separation norm.
#[allow(clippy::too_many_arguments)]
pub fn largest_lyapunov_system<S: Stimulated>(
    sys: &mut S,
    y0: &[f64],
    t0: f64,
    stim: &StimulusProtocol,
    cfg: &SolverConfig,
    atol: &[f64],
    scale: &[f64],
    s: &LyapunovSettings,
) -> Result<LyapunovResult> {
    if !(s.horizon > 2.0 * s.renorm_dt && s.renorm_dt > 0.0 && s.delta0 > 0.0) {
        return Err(Error::Config("Lyapunov horizon must exceed renorm_dt, delta0 > 0".into()));
    }
    if !y0.iter().all(|x| x.is_finite()) {
        return Err(Error::Divergence { t: t0, state: y0.to_vec() });
    }
    let n = y0.len();
    let dir = direction(n, s.seed);
    let mut x = y0.to_vec();
    let mut z: Vec<f64> = (0..n).map(|i| x[i] + s.delta0 * dir[i] * scale[i]).collect();
    let steps = (s.horizon / s.renorm_dt).round() as usize;
    let skip = ((s.discard * steps as f64).round() as usize).min(steps - 1);
    let mut sum = 0.0;
    let mut series = Vec::with_capacity(steps - skip);
    let mut t = t0;
    for k in 0..steps {
        let t1 = t0 + (k + 1) as f64 * s.renorm_dt;
        drive(sys, &mut x, t, t1, stim, cfg, atol, &mut |_| Control::Continue)?;
        drive(sys, &mut z, t, t1, stim, cfg, atol, &mut |_| Control::Continue)?;
        t = t1;
        let d = (0..n).map(|i| ((z[i] - x[i]) / scale[i]).powi(2)).sum::<f64>().sqrt();
        if !d.is_finite() || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { t, state: x });
        }
        // A coincident pair (d = 0) carries no growth information; restart it.
        let (g, unit): (f64, Vec<f64>) = if d > 0.0 {
            ((d / s.delta0).ln(), (0..n).map(|i| (z[i] - x[i]) / scale[i] / d).collect())
        } else {
            (f64::NEG_INFINITY, dir.clone())
        };
        for i in 0..n {
            z[i] = x[i] + s.delta0 * unit[i] * scale[i];
        }
        if k >= skip {
            sum += g.max(-700.0);
            series.push(sum / ((k + 1 - skip) as f64 * s.renorm_dt));
        }
    }
    let lambda1 = *series.last().unwrap();
    let q = series.len() * 3 / 4;
    let drift = (lambda1 - series[q.min(series.len() - 1)]).abs() / lambda1.abs().max(1e-300);
    let verdict = if lambda1 > s.threshold {
        if drift < s.max_drift {
            Verdict::Chaotic
        } else {
            Verdict::Marginal
        }
    } else {
        Verdict::NonChaotic
    };
    Ok(LyapunovResult { lambda1, series, horizon: s.horizon, renorm_dt: s.renorm_dt, drift, verdict })
}

/// Largest Lyapunov exponent of a single cell (unstimulated unless `stim`).
pub fn largest_lyapunov(
    model: &dyn CellModel,
    params: &ParameterSet,
    ic: &[f64],
    stim: &StimulusProtocol,
    cfg: &SolverConfig,
    s: &LyapunovSettings,
) -> Result<LyapunovResult> {
    if ic.len() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: ic.len() });
    }
    let mut sys = CellSystem::new(model, params);
    let atol = cfg.atol_for(model.dim(), 1);
    let scale: Vec<f64> = (0..model.dim()).map(|i| if i == 0 { s.v_scale } else { 1.0 }).collect();
    largest_lyapunov_system(&mut sys, ic, 0.0, stim, cfg, &atol, &scale, s)
}

/// One row of the metrics CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_id: String,
    pub period: Option<f64>,
    pub v_max: f64,
    pub v_min: f64,
    pub apd90: Option<f64>,
    pub ead_count: usize,
    pub lambda1: Option<f64>,
    pub verdict: String,
}

impl RunMetrics {
    pub fn new(run_id: &str, m: &ApMetrics, lyap: Option<&LyapunovResult>, regime: &str) -> Self {
        RunMetrics {
            run_id: run_id.into(),
            period: m.period,
            v_max: m.v_max,
            v_min: m.v_min,
            apd90: m.apd,
            ead_count: m.ead_count(),
            lambda1: lyap.map(|l| l.lambda1),
            verdict: lyap.map(|l| l.verdict.as_str()).unwrap_or(regime).into(),
        }
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.run_id,
            opt(self.period),
            self.v_max,
            self.v_min,
            opt(self.apd90),
            self.ead_count,
            opt(self.lambda1),
            self.verdict
        )
    }
}

pub fn metrics_csv(rows: &[RunMetrics]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{simulate, Sampling, SimOptions};
    use crate::model::noble::{Noble, CHAOTIC_STATE, G_L, REST_STATE};

    fn synthetic(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> Trajectory {
        let n = (t_end / dt) as usize + 1;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let y: Vec<f64> = t.iter().map(|&s| f(s)).collect();
        Trajectory { names: vec!["V".into()], t, y, dense: None, stats: Default::default() }
    }

    fn noble_run(gl: f64, ic: &[f64], t_end: f64) -> Trajectory {
        let m = Noble::new();
        let mut p = m.default_params();
        p.set_at(G_L, gl);
        let opts = SimOptions { sampling: Sampling::Uniform(0.5), keep_dense: true };
        simulate(&m, &p, ic, 0.0, t_end, &StimulusProtocol::none(), &SolverConfig::default(), &opts).unwrap()
    }

    #[test]
    fn constant_trajectory_has_no_period() {
        let tr = synthetic(|_| -80.0, 1000.0, 1.0);
        assert!(measure_period(&tr, &PeriodSettings::default()).is_none());
        assert_eq!(regime(&tr, &PeriodSettings::default()), "equilibrium");
    }

    #[test]
    fn sine_period_is_recovered() {
        let tr = synthetic(|t| 30.0 * (2.0 * std::f64::consts::PI * t / 123.0).sin(), 2000.0, 0.05);
        let t = measure_period(&tr, &PeriodSettings::default()).unwrap();
        assert!((t - 123.0).abs() < 1e-3, "{t}");
    }

    #[test]
    fn alternating_spacing_is_rejected() {
        // Two alternating intervals: a period-2 pattern at the midpoint level.
        let tr = synthetic(|t| (2.0 * std::f64::consts::PI * t / 100.0).sin() + 0.9 * (2.0 * std::f64::consts::PI * t / 200.0 + 0.3).sin(), 3000.0, 0.05);
        assert!(measure_period(&tr, &PeriodSettings::default()).is_none());
    }

    #[test]
    fn noble_periods_from_crossings() {
        for (gl, t) in [(0.075, 564.1345), (0.0, 839.5015), (0.18, 324.2749)] {
            let tr = noble_run(gl, &REST_STATE, 12.0 * t);
            let got = measure_period(&tr, &PeriodSettings::default()).unwrap();
            assert!((got - t).abs() < 0.5, "G_L={gl}: {got}");
        }
    }

    #[test]
    fn injected_bumps_are_counted() {
        // Square-ish AP from -80 to 20 with two 3 mV bumps on the plateau.
        let ap = |t: f64| {
            let base = if (10.0..310.0).contains(&t) { 20.0 - 0.1 * (t - 10.0) } else { -80.0 };
            let bump = |c: f64| 3.0 * (-((t - c) / 8.0).powi(2)).exp();
            base + if (10.0..310.0).contains(&t) { bump(100.0) + bump(200.0) } else { 0.0 }
        };
        let tr = synthetic(ap, 400.0, 0.1);
        let w = ap_windows(&tr, -30.0, &EadSettings::default());
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].eads, 2);
        // Below the prominence threshold they vanish.
        let w = ap_windows(&tr, -30.0, &EadSettings { prominence: 5.0, ..Default::default() });
        assert_eq!(w[0].eads, 0);
    }

    #[test]
    fn spike_and_dome_is_not_an_ead() {
        // Spike to 40, notch at 10 about 20 ms later, dome at 20, then one bump.
        let ap = |t: f64| {
            if !(10.0..400.0).contains(&t) {
                return -85.0;
            }
            let s = t - 10.0;
            let spike = 40.0 - 30.0 * (s / 20.0).min(1.0);
            let dome = if s > 20.0 { 10.0 * ((s - 20.0) / 40.0).min(1.0) - 0.08 * (s - 60.0).max(0.0) } else { 0.0 };
            spike + dome + 4.0 * (-((s - 250.0) / 10.0).powi(2)).exp()
        };
        let tr = synthetic(ap, 500.0, 0.1);
        let w = ap_windows(&tr, -40.0, &EadSettings::default());
        assert_eq!(w[0].eads, 1);
        let w = ap_windows(&tr, -40.0, &EadSettings { notch_window: 0.0, ..Default::default() });
        assert_eq!(w[0].eads, 2);
    }

    #[test]
    fn oscillation_counter_uses_hysteresis() {
        assert_eq!(count_oscillations(&[10.0, 5.0, 6.5, 5.8, 7.0, 2.0], 1.0), 1);
        assert_eq!(count_oscillations(&[10.0, 5.0, 6.5, 5.0, 6.5, 2.0], 1.0), 2);
        assert_eq!(count_oscillations(&[10.0, 9.0, 8.0], 1.0), 0);
    }

    #[test]
    fn noble_aps_have_no_eads() {
        for gl in [0.0, 0.06, 0.12, 0.18] {
            let tr = noble_run(gl, &REST_STATE, 5000.0);
            let m = ap_metrics(&tr, &PeriodSettings::default(), &EadSettings::default());
            assert!(!m.aps.is_empty());
            assert_eq!(m.ead_count(), 0, "G_L={gl}");
            let t = m.period.unwrap();
            assert!(m.apd.unwrap() < t && m.v_max > m.v_min);
        }
    }

    fn lyap(gl: f64, ic: &[f64], s: &LyapunovSettings) -> LyapunovResult {
        let m = Noble::new();
        let mut p = m.default_params();
        p.set_at(G_L, gl);
        largest_lyapunov(&m, &p, ic, &StimulusProtocol::none(), &SolverConfig::default(), s).unwrap()
    }

    #[test]
    fn lyapunov_regimes() {
        let s = LyapunovSettings::default();
        let eq = lyap(0.4, &REST_STATE, &s);
        assert!(eq.lambda1 < 0.0 && eq.verdict == Verdict::NonChaotic, "{}", eq.lambda1);
        let cyc = lyap(0.075, &REST_STATE, &s);
        assert!(cyc.lambda1.abs() < s.threshold, "{}", cyc.lambda1);
        let ch = lyap(0.1845, &CHAOTIC_STATE, &s);
        assert!(ch.lambda1 > s.threshold && ch.verdict == Verdict::Chaotic, "{} drift {}", ch.lambda1, ch.drift);
    }

    #[test]
    fn metrics_csv_layout() {
        let tr = noble_run(0.075, &REST_STATE, 4000.0);
        let m = ap_metrics(&tr, &PeriodSettings::default(), &EadSettings::default());
        let row = RunMetrics::new("r1", &m, None, regime(&tr, &PeriodSettings::default()));
        let csv = metrics_csv(&[row]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), METRICS_HEADER);
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 8);
        assert_eq!(fields[7], "periodic");
        assert!(fields[6].is_empty());
    }
}
