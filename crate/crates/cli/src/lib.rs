//! Command-line front end: argument handling, run manifests and one
//! function per subcommand. Every command writes its outputs and a
//! manifest into the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use cardiobif::cable::{self, CableConfig, CableSystem};
use cardiobif::continuation::{continue_from_rest, BifKind, ContinuationSettings};
use cardiobif::cycles::{
    branch_switch_pd, continue_limit_cycles, find_limit_cycle, guess_from_simulation, CycleContinuationSettings,
    CycleStart,
};
use cardiobif::diagnostics::{
    ap_metrics, largest_lyapunov, metrics_csv, regime, EadSettings, LyapunovSettings, PeriodSettings, RunMetrics,
};
use cardiobif::equilibria::{self, find_all_equilibria, find_rest, DEFAULT_RANGE};
use cardiobif::integrator::{simulate, OdeSystem, Sampling, SimOptions, SolverConfig, StimulusProtocol};
use cardiobif::model::{bernus, load_model, model_source, noble, CellModel, ParameterSet, SharedModel};
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "CARDIOBIF_OUT";

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_NOT_FOUND: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "cardiobif", version, about = "Cardiac cell bifurcation and cable workbench")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Relative tolerance of the stiff solver.
    #[arg(long, global = true)]
    pub rtol: Option<f64>,
    /// Absolute tolerance on V (gates use atol/100).
    #[arg(long, global = true)]
    pub atol: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = "cardiobif-out")]
    pub out: PathBuf,
    /// Seed for the Lyapunov perturbation direction.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for `sweep`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Parameter override NAME=VALUE; `--NAME VALUE` is accepted too.
    #[arg(long = "set", global = true, value_name = "NAME=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one cell and report AP metrics.
    Simulate(SimulateArgs),
    /// All equilibria with their spectra and Hurwitz data.
    Eq(ModelArgs),
    /// Continue an equilibrium (--eq) or limit-cycle (--lc) branch.
    Continue(ContinueArgs),
    /// Run a 1D cable preset or configuration file.
    Cable(CableArgs),
    /// Largest Lyapunov exponent of one cell.
    Lyapunov(LyapunovArgs),
    /// Mode-k stability of the rest equilibrium on a cable.
    Modes(ModesArgs),
    /// Simulate a range of parameter values in parallel.
    Sweep(SweepArgs),
    /// Re-run a manifest and compare its headline metrics.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelArgs {
    /// Builtin model (noble, noble-json, bernus) or a model JSON file.
    pub model: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct StimArgs {
    /// Pulse amplitude (µA/cm²); the model default when omitted.
    #[arg(long)]
    pub stim_amplitude: Option<f64>,
    #[arg(long)]
    pub stim_duration: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub stim_start: f64,
    /// Pulse period; a single pulse when omitted.
    #[arg(long)]
    pub stim_period: Option<f64>,
    #[arg(long)]
    pub stim_count: Option<usize>,
    /// No stimulus at all.
    #[arg(long)]
    pub no_stim: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    pub model: String,
    #[arg(long, default_value_t = 5000.0)]
    pub t_end: f64,
    /// rest, chaotic, a comma-separated state, or a JSON file with an array.
    #[arg(long, default_value = "rest")]
    pub ic: String,
    /// Sample spacing of the trajectory CSV (ms).
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Also estimate the largest Lyapunov exponent.
    #[arg(long)]
    pub lyapunov: bool,
    #[command(flatten)]
    pub stim: StimArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ContinueArgs {
    pub model: String,
    /// Parameter symbol (normalized: GL matches G_L).
    pub param: String,
    pub from: f64,
    pub to: f64,
    #[arg(long, conflicts_with = "lc")]
    pub eq: bool,
    #[arg(long)]
    pub lc: bool,
    /// Follow the doubled branch from every period doubling (--lc).
    #[arg(long)]
    pub switch_pd: bool,
    /// Settling time before the starting cycle is extracted (--lc).
    #[arg(long, default_value_t = 5000.0)]
    pub settle: f64,
    #[arg(long)]
    pub max_points: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CableArgs {
    /// Preset id; see --list.
    pub scenario: Option<String>,
    /// Cable configuration JSON file.
    #[arg(long, conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    /// List the presets.
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
    /// Skip the whole-cable Lyapunov estimate.
    #[arg(long)]
    pub no_lyapunov: bool,
    /// Keep every n-th time sample in the field CSV.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LyapunovArgs {
    pub model: String,
    #[arg(long, default_value = "rest")]
    pub ic: String,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub renorm_dt: Option<f64>,
    #[arg(long)]
    pub delta0: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModesArgs {
    pub model: String,
    #[arg(long, default_value_t = 200)]
    pub kmax: usize,
    /// A single mode instead of 0..=kmax.
    #[arg(long)]
    pub k: Option<usize>,
    /// Cable length (cm).
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
    /// Diffusion constant (mS).
    #[arg(long, default_value_t = cable::DEFAULT_DIFFUSION)]
    pub diffusion: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SweepArgs {
    pub model: String,
    pub param: String,
    pub from: f64,
    pub to: f64,
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    #[arg(long, default_value_t = 5000.0)]
    pub t_end: f64,
    #[arg(long, default_value = "rest")]
    pub ic: String,
    #[command(flatten)]
    pub stim: StimArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Relative tolerance on headline metrics.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

/// Bad command-line input.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Help or version text requested.
#[derive(Debug)]
pub struct Info(pub String);

impl std::fmt::Display for Info {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Info {}

/// Process exit status for an error.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Info>().is_some() {
        return 0;
    }
    if e.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    for cause in e.chain() {
        if let Some(ce) = cause.downcast_ref::<cardiobif::Error>() {
            use cardiobif::Error as E;
            return match ce {
                E::NotFound(_) => EXIT_NOT_FOUND,
                E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_NOT_FOUND,
                _ if ce.is_numerical() => EXIT_NUMERICAL,
                E::Io(_) => 1,
                _ => EXIT_USAGE,
            };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return EXIT_NOT_FOUND;
            }
        }
    }
    1
}

/// Provenance of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    /// Every setting the run used, defaults included.
    pub resolved: Value,
    pub model: Option<String>,
    pub model_sha256: Option<String>,
    pub outputs: Vec<String>,
    /// Key results, compared by `replay`.
    pub headline: BTreeMap<String, f64>,
    pub wall_seconds: f64,
    pub version: String,
}

// ----------------------------------------------------------------------------
// Argument preprocessing

fn known_flags() -> BTreeSet<String> {
    let mut out = BTreeSet::from(["help".to_string(), "version".to_string()]);
    let cmd = Cli::command();
    let mut add = |c: &clap::Command| {
        for a in c.get_arguments() {
            if let Some(l) = a.get_long() {
                out.insert(l.to_string());
            }
        }
    };
    add(&cmd);
    for s in cmd.get_subcommands() {
        add(s);
    }
    out
}

/// Turn `--NAME VALUE` / `--NAME=VALUE` for unknown flag names into
/// `--set NAME=VALUE`.
pub fn rewrite_param_flags(argv: &[String]) -> Vec<String> {
    let known = known_flags();
    let mut out = Vec::with_capacity(argv.len());
    let mut i = 0;
    while i < argv.len() {
        let a = &argv[i];
        if let Some(flag) = a.strip_prefix("--") {
            let (name, inline) = match flag.split_once('=') {
                Some((n, v)) => (n, Some(v.to_string())),
                None => (flag, None),
            };
            if !name.is_empty() && !known.contains(name) {
                let value = inline.or_else(|| argv.get(i + 1).filter(|v| v.parse::<f64>().is_ok()).cloned());
                if let Some(v) = value {
                    if !a.contains('=') {
                        i += 1;
                    }
                    out.push("--set".into());
                    out.push(format!("{name}={v}"));
                    i += 1;
                    continue;
                }
            }
        }
        out.push(a.clone());
        i += 1;
    }
    out
}

/// Canonical name of a user-written parameter symbol (GL, g-l and G_L all
/// name G_L).
pub fn resolve_param(p: &ParameterSet, sym: &str) -> anyhow::Result<String> {
    let i = p.resolve(sym)?;
    Ok(p.names()[i].clone())
}

fn apply_overrides(p: &mut ParameterSet, set: &[String]) -> anyhow::Result<()> {
    for s in set {
        let (k, v) = s.split_once('=').ok_or_else(|| Usage(format!("override `{s}` is not NAME=VALUE")))?;
        let v: f64 = v.parse().map_err(|_| Usage(format!("override `{s}`: `{v}` is not a number")))?;
        let name = resolve_param(p, k)?;
        p.set(&name, v)?;
    }
    p.validate()?;
    Ok(())
}

// ----------------------------------------------------------------------------
// Shared helpers

struct Ctx {
    common: Common,
    argv: Vec<String>,
    start: Instant,
    outputs: Vec<String>,
}

impl Ctx {
    fn solver(&self, base: SolverConfig) -> SolverConfig {
        let mut s = base;
        if let Some(r) = self.common.rtol {
            s.rtol = r;
        }
        if let Some(a) = self.common.atol {
            s.atol_v = a;
            s.atol_gate = a * 1e-2;
        }
        s
    }

    fn write(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.common.out).with_context(|| format!("creating {}", self.common.out.display()))?;
        let path = self.common.out.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    fn finish(mut self, command: &str, model: Option<&str>, resolved: Value, headline: BTreeMap<String, f64>) -> anyhow::Result<()> {
        let model_sha256 = match model {
            Some(m) => Some(sha256_hex(&model_source(m)?)),
            None => None,
        };
        let manifest_name = format!("{command}-manifest.json");
        let mut outputs = self.outputs.clone();
        outputs.push(self.common.out.join(&manifest_name).display().to_string());
        let m = RunManifest {
            command: command.into(),
            argv: self.argv.clone(),
            resolved,
            model: model.map(String::from),
            model_sha256,
            outputs,
            headline,
            wall_seconds: self.start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").into(),
        };
        let text = serde_json::to_string_pretty(&m)?;
        self.write(&manifest_name, &text)?;
        Ok(())
    }
}

pub fn sha256_hex(text: &str) -> String {
    let d = Sha256::digest(text.as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn model_and_params(spec: &str, set: &[String]) -> anyhow::Result<(SharedModel, ParameterSet)> {
    let m = load_model(spec)?;
    let mut p = m.default_params();
    apply_overrides(&mut p, set)?;
    Ok((m, p))
}

fn is_bernus(model: &dyn CellModel) -> bool {
    model.dim() == bernus::REST_STATE.len() && model.name().to_ascii_lowercase().contains("bernus")
}

/// Named or explicit initial state.
pub fn parse_ic(model: &dyn CellModel, ic: &str) -> anyhow::Result<Vec<f64>> {
    let x = match ic {
        "rest" | "default" => model.default_state(),
        "chaotic" if is_bernus(model) => bernus::CHAOTIC_STATE.to_vec(),
        "chaotic" if model.dim() == 4 => noble::CHAOTIC_STATE.to_vec(),
        "chaotic" => return Err(Usage(format!("no chaotic state is known for model {}", model.name())).into()),
        s if Path::new(s).exists() => serde_json::from_str(&std::fs::read_to_string(s)?)?,
        s => s
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| Usage(format!("--ic `{s}`: expected rest, chaotic, a comma-separated state or a JSON file")))?,
    };
    if x.len() != model.dim() {
        bail!(Usage(format!("initial state has {} values, model {} has {} states", x.len(), model.name(), model.dim())));
    }
    Ok(x)
}

/// Stimulus from flags; the ventricular model defaults to one 40 µA/cm², 2 ms pulse.
pub fn stimulus(model: &dyn CellModel, a: &StimArgs) -> StimulusProtocol {
    let default_amplitude = if is_bernus(model) { bernus::STIM_AMPLITUDE } else { 0.0 };
    let amplitude = a.stim_amplitude.unwrap_or(default_amplitude);
    if a.no_stim || amplitude == 0.0 {
        return StimulusProtocol::none();
    }
    let duration = a.stim_duration.unwrap_or(bernus::STIM_DURATION);
    // without a period the train is a single pulse
    let count = if a.stim_period.is_some() { a.stim_count } else { Some(a.stim_count.unwrap_or(1)) };
    StimulusProtocol { amplitude, start: a.stim_start, duration, period: a.stim_period, count }
}

fn params_map(p: &ParameterSet) -> BTreeMap<String, f64> {
    p.to_pairs().into_iter().collect()
}

fn opt(headline: &mut BTreeMap<String, f64>, k: &str, v: Option<f64>) {
    if let Some(v) = v {
        headline.insert(k.into(), v);
    }
}

// ----------------------------------------------------------------------------
// Entry point

/// Parse `argv` (program name first) and run the command.
pub fn run(argv: &[String]) -> anyhow::Result<()> {
    let rewritten = rewrite_param_flags(argv);
    let cli = match Cli::try_parse_from(&rewritten) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            return match e.kind() {
                K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand => Err(Info(e.to_string()).into()),
                _ => Err(Usage(e.to_string()).into()),
            };
        }
    };
    let ctx = Ctx { common: cli.common.clone(), argv: argv.to_vec(), start: Instant::now(), outputs: Vec::new() };
    match cli.command {
        Command::Simulate(a) => cmd_simulate(ctx, &a),
        Command::Eq(a) => cmd_eq(ctx, &a),
        Command::Continue(a) => cmd_continue(ctx, &a),
        Command::Cable(a) => cmd_cable(ctx, &a),
        Command::Lyapunov(a) => cmd_lyapunov(ctx, &a),
        Command::Modes(a) => cmd_modes(ctx, &a),
        Command::Sweep(a) => cmd_sweep(ctx, &a),
        Command::Replay(a) => cmd_replay(ctx, &a),
    }
}

// ----------------------------------------------------------------------------
// Commands

fn cmd_simulate(mut ctx: Ctx, a: &SimulateArgs) -> anyhow::Result<()> {
    let (m, p) = model_and_params(&a.model, &ctx.common.set)?;
    let ic = parse_ic(&*m, &a.ic)?;
    let stim = stimulus(&*m, &a.stim);
    let solver = ctx.solver(SolverConfig::default());
    let dense = SimOptions { sampling: Sampling::Steps, keep_dense: true };
    let tr = simulate(&*m, &p, &ic, 0.0, a.t_end, &stim, &solver, &dense)?;
    let ps = PeriodSettings::default();
    let es = EadSettings::default();
    let am = ap_metrics(&tr, &ps, &es);
    let reg = regime(&tr, &ps);
    let ls = LyapunovSettings { seed: ctx.common.seed, ..Default::default() };
    let lyap = if a.lyapunov { Some(largest_lyapunov(&*m, &p, &ic, &stim, &solver, &ls)?) } else { None };
    let row = RunMetrics::new("simulate", &am, lyap.as_ref(), reg);
    let sampled = simulate(&*m, &p, &ic, 0.0, a.t_end, &stim, &solver, &SimOptions { sampling: Sampling::Uniform(a.dt), keep_dense: false })?;
    ctx.write("simulate.csv", &sampled.to_csv(1))?;
    ctx.write("simulate-metrics.csv", &metrics_csv(std::slice::from_ref(&row)))?;
    let metrics = json!({ "metrics": row, "regime": reg, "steps": tr.stats.accepted, "lyapunov": lyap.as_ref().map(|l| json!({"lambda1": l.lambda1, "verdict": l.verdict.as_str(), "drift": l.drift})) });
    ctx.write("simulate-metrics.json", &serde_json::to_string_pretty(&metrics)?)?;
    println!("verdict: {}", row.verdict);
    println!("period: {}", row.period.map_or("none".into(), |t| format!("{t:.4} ms")));
    println!("V range: [{:.3}, {:.3}] mV, EAD count {}", row.v_min, row.v_max, row.ead_count);
    if let Some(l) = &lyap {
        println!("lambda1: {:.4e} /ms ({})", l.lambda1, l.verdict.as_str());
    }
    let mut h = BTreeMap::new();
    opt(&mut h, "period", row.period);
    h.insert("v_max".into(), row.v_max);
    h.insert("v_min".into(), row.v_min);
    h.insert("ead_count".into(), row.ead_count as f64);
    opt(&mut h, "lambda1", row.lambda1);
    let resolved = json!({ "args": a, "params": params_map(&p), "ic": ic, "stimulus": stim, "solver": solver, "period_settings": ps, "ead_settings": es, "lyapunov": a.lyapunov.then_some(&ls) });
    ctx.finish("simulate", Some(&a.model), resolved, h)
}

fn cmd_eq(mut ctx: Ctx, a: &ModelArgs) -> anyhow::Result<()> {
    let (m, p) = model_and_params(&a.model, &ctx.common.set)?;
    let eqs = find_all_equilibria(&*m, &p, DEFAULT_RANGE, 2500);
    if eqs.is_empty() {
        bail!(cardiobif::Error::NotFound(format!("no equilibrium of {} in V ∈ {:?}", m.name(), DEFAULT_RANGE)));
    }
    ctx.write("eq.csv", &equilibria::to_csv(&eqs, m.state_names()))?;
    ctx.write("eq.json", &serde_json::to_string_pretty(&eqs)?)?;
    let mut h = BTreeMap::new();
    for (i, e) in eqs.iter().enumerate() {
        println!("V = {:.6} mV  max Re = {:.4e}  {}", e.v(), e.max_re(), e.stability.as_str());
        h.insert(format!("V{i}"), e.v());
        h.insert(format!("max_re{i}"), e.max_re());
    }
    let resolved = json!({ "args": a, "params": params_map(&p), "range": DEFAULT_RANGE, "samples": 2500 });
    ctx.finish("eq", Some(&a.model), resolved, h)
}

fn cmd_continue(mut ctx: Ctx, a: &ContinueArgs) -> anyhow::Result<()> {
    let (m, mut p) = model_and_params(&a.model, &ctx.common.set)?;
    let name = resolve_param(&p, &a.param)?;
    if !a.eq && !a.lc {
        bail!(Usage("choose --eq or --lc".into()));
    }
    let mut h = BTreeMap::new();
    let record = |h: &mut BTreeMap<String, f64>, tag: &str, kind: BifKind, param: f64| {
        let n = h.keys().filter(|k| k.starts_with(&format!("{tag}{kind:?}"))).count();
        h.insert(format!("{tag}{kind:?}{n}"), param);
    };
    if a.eq {
        let mut s = ContinuationSettings::default();
        if let Some(n) = a.max_points {
            s.max_points = n;
        }
        let b = continue_from_rest(&*m, &p, &name, (a.from, a.to), &s)?;
        ctx.write("continue-eq.json", &b.to_json())?;
        ctx.write("continue-eq.csv", &b.to_csv())?;
        for q in &b.bifurcations {
            let crit = q.criticality.map(|c| format!(" {c:?}").to_lowercase()).unwrap_or_default();
            println!("{:?} at {name} = {:.6}{crit}", q.kind, q.param);
            record(&mut h, "", q.kind, q.param);
        }
        if b.bifurcations.is_empty() {
            println!("no bifurcation in [{}, {}]", a.from, a.to);
        }
        let resolved = json!({ "args": a, "params": params_map(&p), "settings": s });
        return ctx.finish("continue", Some(&a.model), resolved, h);
    }
    p.set(&name, a.from)?;
    let mut s = CycleContinuationSettings::default();
    s.shooting.solver = ctx.solver(s.shooting.solver.clone());
    if let Some(n) = a.max_points {
        s.max_points = n;
    }
    let ic = m.default_state();
    let (x, t) = guess_from_simulation(&*m, &p, &ic, a.settle, &s.shooting.solver)?;
    let mut c = find_limit_cycle(&*m, &p, (&x, t), &s.shooting)?;
    c.param = a.from;
    let dir = if a.to >= a.from { 1.0 } else { -1.0 };
    let b = continue_limit_cycles(&*m, &p, &name, CycleStart::Cycle { cycle: &c, direction: dir }, (a.from, a.to), &s)?;
    ctx.write("continue-lc.json", &b.to_json())?;
    ctx.write("continue-lc.csv", &b.to_csv())?;
    println!("cycle at {name} = {}: T = {:.4} ms; branch of {} cycles, stopped: {}", a.from, c.period, b.points.len(), b.stop_reason);
    for q in &b.bifurcations {
        println!("{:?} at {name} = {:.6} (T = {:.3} ms)", q.kind, q.param, q.period.unwrap_or(f64::NAN));
        record(&mut h, "", q.kind, q.param);
    }
    let mut switched = Vec::new();
    if a.switch_pd {
        for (k, pd) in b.of_kind(BifKind::PD).into_iter().enumerate() {
            let sw = match branch_switch_pd(&*m, &p, &name, pd, &s.shooting) {
                Ok(sw) => sw,
                Err(e) => {
                    println!("PD at {:.6}: no switch ({e})", pd.param);
                    continue;
                }
            };
            let (lo, hi) = (a.from.min(a.to), a.from.max(a.to));
            match continue_limit_cycles(&*m, &p, &name, CycleStart::Switch(&sw), (lo, hi), &s) {
                Ok(d) => {
                    ctx.write(&format!("continue-lc-pd{k}.json"), &d.to_json())?;
                    ctx.write(&format!("continue-lc-pd{k}.csv"), &d.to_csv())?;
                    println!("doubled branch from PD {:.6}: {} cycles, stopped: {}", pd.param, d.points.len(), d.stop_reason);
                    for q in &d.bifurcations {
                        println!("  {:?} at {name} = {:.6}", q.kind, q.param);
                        record(&mut h, &format!("pd{k}_"), q.kind, q.param);
                    }
                    switched.push(pd.param);
                }
                Err(e) => println!("doubled branch from PD {:.6} failed: {e}", pd.param),
            }
        }
    }
    let resolved = json!({ "args": a, "params": params_map(&p), "settings": s, "start_period": c.period, "switched": switched });
    ctx.finish("continue", Some(&a.model), resolved, h)
}

/// Largest |V| gap between the cable and standalone cells, and the standalone
/// runs' own global error against a 1000x tighter solve.
fn decoupling_check(model: &dyn CellModel, cfg: &CableConfig, field: &cable::CableField, solver: &SolverConfig) -> anyhow::Result<(f64, f64)> {
    let params = cfg.region_params(model)?;
    let regions = cfg.cell_regions()?;
    let y0 = cable::build_region_ic(model, cfg)?;
    let d = model.dim();
    let mut tight = solver.clone();
    tight.rtol *= 1e-3;
    tight.atol_v *= 1e-3;
    tight.atol_gate *= 1e-3;
    let (mut worst, mut global): (f64, f64) = (0.0, 0.0);
    let dense = SimOptions { sampling: Sampling::Steps, keep_dense: true };
    for c in [0, cfg.cells / 2, cfg.cells - 1] {
        let r = regions[c];
        let mut stim = cfg.stimulus.clone();
        stim.amplitude *= cfg.regions[r].stimulus;
        let x0 = &y0[c * d..(c + 1) * d];
        let tr = simulate(model, &params[r], x0, 0.0, cfg.t_end, &stim, solver, &dense)?;
        let reference = simulate(model, &params[r], x0, 0.0, cfg.t_end, &stim, &tight, &dense)?;
        for (k, &t) in field.times.iter().enumerate() {
            if let (Some(v), Some(w)) = (tr.eval(t, 0), reference.eval(t, 0)) {
                worst = worst.max((v - field.row(k)[c]).abs());
                global = global.max((v - w).abs());
            }
        }
    }
    Ok((worst, global))
}

fn cmd_cable(mut ctx: Ctx, a: &CableArgs) -> anyhow::Result<()> {
    if a.list {
        for id in cable::NOBLE_SCENARIOS.iter().chain(cable::BERNUS_SCENARIOS.iter()) {
            println!("{id}");
        }
        return Ok(());
    }
    let mut cfg = match (&a.scenario, &a.config) {
        (Some(id), None) => cable::cable_scenario(id)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(cardiobif::Error::from).with_context(|| format!("reading {}", path.display()))?;
            CableConfig::from_json(&text)?
        }
        _ => bail!(Usage("give a scenario id or --config FILE (see --list)".into())),
    };
    if let Some(t) = a.t_end {
        cfg.t_end = t;
    }
    if let Some(n) = a.cells {
        cfg.cells = n;
    }
    if a.no_lyapunov {
        cfg.probes.lyapunov = None;
    }
    if let Some(ls) = cfg.probes.lyapunov.as_mut() {
        ls.seed = ctx.common.seed;
    }
    for s in &ctx.common.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Usage(format!("override `{s}` is not NAME=VALUE")))?;
        let v: f64 = v.parse().map_err(|_| Usage(format!("override `{s}`: `{v}` is not a number")))?;
        let m = load_model(&cfg.model)?;
        let name = resolve_param(&m.default_params(), k)?;
        cfg.params.insert(name, v);
    }
    cfg.validate()?;
    let m = load_model(&cfg.model)?;
    let solver = ctx.solver(cable::cable_solver());
    let (field, report) = cable::run_cable(&*m, &cfg, &solver)?;
    let mut h = BTreeMap::new();
    let decoupling = if cfg.diffusion == 0.0 { Some(decoupling_check(&*m, &cfg, &field, &solver)?) } else { None };
    ctx.write("cable-field.csv", &field.to_csv(a.stride))?;
    let mut sidecar = serde_json::to_value(&report)?;
    if let Some((dev, global)) = decoupling {
        sidecar["decoupling_max_deviation"] = json!(dev);
        sidecar["decoupling_single_cell_error"] = json!(global);
    }
    sidecar["steps"] = json!(field.steps);
    ctx.write("cable-report.json", &serde_json::to_string_pretty(&sidecar)?)?;
    println!("cable {} ({} cells, D = {} mS, {} ms)", if cfg.id.is_empty() { "config" } else { &cfg.id }, cfg.cells, cfg.diffusion, cfg.t_end);
    for pr in &report.probes {
        println!(
            "probe x = {:.3}: {} ({}), EAD count {}, V [{:.2}, {:.2}]",
            pr.x, pr.verdict, pr.regime, pr.ead_count, pr.v_min, pr.v_max
        );
        h.insert(format!("ead_count_{}", pr.cell), pr.ead_count as f64);
    }
    if let Some(l) = report.lambda1 {
        println!("cable lambda1: {l:.4e} /ms");
        h.insert("lambda1".into(), l);
    }
    if let Some((dev, global)) = decoupling {
        let tol = 10.0 * global.max(1e-9);
        println!("decoupling check: {} (max deviation {dev:.3e} mV, limit {tol:.1e})", if dev < tol { "pass" } else { "FAIL" });
        h.insert("decoupling_max_deviation".into(), dev);
    }
    if let Some((t, e)) = &report.failure {
        println!("integration failed at t = {t} ms: {e} (partial field written)");
    }
    h.insert("terminal_mean".into(), report.terminal_mean);
    let resolved = json!({ "args": a, "config": cfg, "solver": solver, "dim": CableSystem::new(&*m, &cfg)?.dim() });
    ctx.finish("cable", Some(&cfg.model.clone()), resolved, h)
}

fn cmd_lyapunov(mut ctx: Ctx, a: &LyapunovArgs) -> anyhow::Result<()> {
    let (m, p) = model_and_params(&a.model, &ctx.common.set)?;
    let ic = parse_ic(&*m, &a.ic)?;
    let mut s = LyapunovSettings { seed: ctx.common.seed, ..Default::default() };
    if let Some(h) = a.horizon {
        s.horizon = h;
    }
    if let Some(r) = a.renorm_dt {
        s.renorm_dt = r;
    }
    if let Some(d) = a.delta0 {
        s.delta0 = d;
    }
    let solver = ctx.solver(SolverConfig::default());
    let r = largest_lyapunov(&*m, &p, &ic, &StimulusProtocol::none(), &solver, &s)?;
    let mut csv = String::from("t,lambda1\n");
    let t0 = s.horizon - r.series.len() as f64 * s.renorm_dt;
    for (k, l) in r.series.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", t0 + (k + 1) as f64 * s.renorm_dt, l));
    }
    ctx.write("lyapunov.csv", &csv)?;
    ctx.write("lyapunov.json", &serde_json::to_string_pretty(&json!({"lambda1": r.lambda1, "drift": r.drift, "verdict": r.verdict.as_str(), "horizon": r.horizon, "renorm_dt": r.renorm_dt}))?)?;
    println!("lambda1: {:.4e} /ms ({}; drift {:.3})", r.lambda1, r.verdict.as_str(), r.drift);
    let h = BTreeMap::from([("lambda1".to_string(), r.lambda1)]);
    let resolved = json!({ "args": a, "params": params_map(&p), "ic": ic, "settings": s, "solver": solver });
    ctx.finish("lyapunov", Some(&a.model), resolved, h)
}

fn cmd_modes(mut ctx: Ctx, a: &ModesArgs) -> anyhow::Result<()> {
    let (m, p) = model_and_params(&a.model, &ctx.common.set)?;
    let eq = find_rest(&*m, &p)?;
    let mut h = BTreeMap::new();
    let modes = match a.k {
        Some(k) => vec![cable::mode_jacobian(&*m, &p, &eq.state, k, a.length, a.diffusion)?],
        None => {
            let (modes, kstar) = cable::mode_scan(&*m, &p, &eq.state, a.kmax, a.length, a.diffusion)?;
            match kstar {
                Some(k) => {
                    println!("all modes k >= {k} are stable (checked up to {})", a.kmax);
                    h.insert("kstar".into(), k as f64);
                }
                None => println!("mode {} is still not stable", a.kmax),
            }
            modes
        }
    };
    ctx.write("modes.csv", &cable::modes_csv(&modes))?;
    ctx.write("modes.json", &serde_json::to_string_pretty(&modes)?)?;
    println!("equilibrium V = {:.6} mV ({}), cell max Re = {:.4e}", eq.v(), eq.stability.as_str(), eq.max_re());
    for md in modes.iter().take(if a.k.is_some() { 1 } else { 3 }) {
        println!("k = {}: shift {:.4e}, max Re {:.4e}, {}", md.k[0], md.shift, md.max_re, md.stability.as_str());
    }
    h.insert("max_re_first".into(), modes[0].max_re);
    h.insert("v_inf".into(), eq.v());
    let resolved = json!({ "args": a, "params": params_map(&p), "equilibrium": eq.state });
    ctx.finish("modes", Some(&a.model), resolved, h)
}

fn cmd_sweep(mut ctx: Ctx, a: &SweepArgs) -> anyhow::Result<()> {
    let (m, p) = model_and_params(&a.model, &ctx.common.set)?;
    let name = resolve_param(&p, &a.param)?;
    if a.points < 1 {
        bail!(Usage("--points must be at least 1".into()));
    }
    let ic = parse_ic(&*m, &a.ic)?;
    let stim = stimulus(&*m, &a.stim);
    let solver = ctx.solver(SolverConfig::default());
    let values: Vec<f64> = (0..a.points)
        .map(|i| if a.points == 1 { a.from } else { a.from + (a.to - a.from) * i as f64 / (a.points - 1) as f64 })
        .collect();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = ctx.common.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build()?;
    let rows: Vec<anyhow::Result<RunMetrics>> = pool.install(|| {
        use rayon::prelude::*;
        values
            .par_iter()
            .map(|&v| {
                let mut q = p.clone();
                q.set(&name, v)?;
                let opts = SimOptions { sampling: Sampling::Steps, keep_dense: true };
                let tr = simulate(&*m, &q, &ic, 0.0, a.t_end, &stim, &solver, &opts)?;
                let ps = PeriodSettings::default();
                let am = ap_metrics(&tr, &ps, &EadSettings::default());
                Ok(RunMetrics::new(&format!("{name}={v}"), &am, None, regime(&tr, &ps)))
            })
            .collect()
    });
    let rows: Vec<RunMetrics> = rows.into_iter().collect::<anyhow::Result<_>>()?;
    ctx.write("sweep.csv", &metrics_csv(&rows))?;
    let mut h = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        println!("{}: {} T {} EADs {}", r.run_id, r.verdict, r.period.map_or("-".into(), |t| format!("{t:.4}")), r.ead_count);
        opt(&mut h, &format!("period{i}"), r.period);
    }
    let resolved = json!({ "args": a, "params": params_map(&p), "values": values, "ic": ic, "stimulus": stim, "solver": solver, "workers": ctx.common.workers });
    ctx.finish("sweep", Some(&a.model), resolved, h)
}

fn cmd_replay(ctx: Ctx, a: &ReplayArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.manifest).map_err(cardiobif::Error::from).with_context(|| format!("reading {}", a.manifest.display()))?;
    let old: RunManifest = serde_json::from_str(&text).map_err(cardiobif::Error::from)?;
    if old.command == "replay" {
        bail!(Usage("a replay manifest cannot be replayed".into()));
    }
    let out = ctx.common.out.clone();
    let mut argv: Vec<String> = Vec::with_capacity(old.argv.len() + 2);
    let mut skip = false;
    for (i, s) in old.argv.iter().enumerate() {
        if skip {
            skip = false;
            continue;
        }
        if s == "--out" {
            skip = true;
            continue;
        }
        if s.starts_with("--out=") {
            continue;
        }
        argv.push(s.clone());
        if i == 0 {
            argv.push("--out".into());
            argv.push(out.display().to_string());
        }
    }
    run(&argv)?;
    let path = out.join(format!("{}-manifest.json", old.command));
    let new: RunManifest = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let mut bad = Vec::new();
    for (k, v) in &old.headline {
        match new.headline.get(k) {
            Some(w) if (w - v).abs() <= a.tol * v.abs().max(1.0) => {}
            Some(w) => bad.push(format!("{k}: {v} -> {w}")),
            None => bad.push(format!("{k}: missing")),
        }
    }
    if bad.is_empty() {
        println!("replay reproduces {} headline values within {:e}", old.headline.len(), a.tol);
        Ok(())
    } else {
        Err(anyhow!(cardiobif::Error::Convergence { msg: format!("replay differs: {}", bad.join("; ")), residual: f64::NAN }))
    }
}
