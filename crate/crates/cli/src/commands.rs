use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nonadiabat::consistency::{audit, ConsistencyReport};
use nonadiabat::entropy::{rates_along, EntropyRates};
use nonadiabat::kraus::{audit_map, dual_cptp_check, invariant_state_with_gap, KrausAudit};
use nonadiabat::model::{propagate, steady_state, LindbladModel};
use nonadiabat::trajectory::{default_schedule, EnsembleStats, Simulation, TrajectoryConfig};
use nonadiabat::{CMat, DensityMatrix};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::scenario::{Body, KrausScenario, LindbladScenario, RunSpec, Scenario, ScenarioTolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Verb {
    Validate,
    Steady,
    Propagate,
    Rates,
    Trajectories,
    KrausAudit,
    Equivalence,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Validate => "validate",
            Verb::Steady => "steady",
            Verb::Propagate => "propagate",
            Verb::Rates => "rates",
            Verb::Trajectories => "trajectories",
            Verb::KrausAudit => "kraus-audit",
            Verb::Equivalence => "equivalence",
        }
    }
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub ntraj: Option<usize>,
    pub tol_overrides: Vec<(String, f64)>,
    pub event_log: bool,
}

/// Largest equivalence residual over a rates grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceSummary {
    pub points: usize,
    /// Grid points where no privileged weights exist.
    pub missing_weights: usize,
    pub max_residual: f64,
    /// `max |Ṡ_ex(relative entropy) − Ṡ_ex(weights)| / (1 + |Ṡ_ex|)`.
    pub max_scaled_residual: f64,
    pub t_at_max: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub verb: Verb,
    pub consistency: Vec<ConsistencyReport>,
    pub rates: Vec<EntropyRates>,
    pub ensemble: Option<EnsembleStats>,
    pub equivalence: Option<EquivalenceSummary>,
    pub kraus: Option<KrausAudit>,
    /// Failed physics checks; a nonempty list means exit status 2.
    pub failures: Vec<String>,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

impl RunReport {
    fn new(verb: Verb) -> Self {
        Self {
            verb,
            consistency: Vec::new(),
            rates: Vec::new(),
            ensemble: None,
            equivalence: None,
            kraus: None,
            failures: Vec::new(),
            files: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }

    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn write_json(&mut self, dir: &Path, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
        text.push('\n');
        self.write(dir, name, &text)
    }
}

pub fn run_command(verb: Verb, mut scenario: Scenario, opts: &RunOptions) -> Result<RunReport, CliError> {
    for (key, value) in &opts.tol_overrides {
        scenario.tolerances.set(key, *value)?;
    }
    if let Body::Lindblad(l) = &mut scenario.body {
        if let Some(seed) = opts.seed {
            l.run.base_seed = seed;
        }
        if let Some(dt) = opts.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::invalid("--dt", "must be positive"));
            }
            l.run.dt = dt;
        }
        if let Some(n) = opts.ntraj {
            l.run.n_traj = n;
        }
    }
    std::fs::create_dir_all(&opts.out).map_err(|source| CliError::Io {
        path: opts.out.clone(),
        source,
    })?;
    let mut report = RunReport::new(verb);
    let tol = scenario.tolerances;
    let name = scenario.name.as_str();
    let out = opts.out.as_path();
    match (&scenario.body, verb) {
        (Body::Lindblad(l), Verb::Validate) => validate(&mut report, name, l, &tol, out)?,
        (Body::Kraus(k), Verb::Validate) => validate_kraus(&mut report, name, k, out)?,
        (Body::Lindblad(l), Verb::Steady) => steady(&mut report, name, l, out)?,
        (Body::Lindblad(l), Verb::Propagate) => propagate_states(&mut report, l, out)?,
        (Body::Lindblad(l), Verb::Rates) => rates(&mut report, l, &tol, out, false)?,
        (Body::Lindblad(l), Verb::Equivalence) => {
            rates(&mut report, l, &tol, out, true)?;
            let summary = report.equivalence.expect("set by rates");
            report.write_json(out, "equivalence.json", &json!({ "scenario": name, "equivalence": summary }))?;
        }
        (Body::Lindblad(l), Verb::Trajectories) => trajectories(&mut report, name, l, &tol, out, opts.event_log)?,
        (Body::Kraus(k), Verb::KrausAudit) => kraus_audit(&mut report, name, k, &tol, out)?,
        (body, verb) => {
            let kind = match body {
                Body::Lindblad(_) => "lindblad",
                Body::Kraus(_) => "kraus",
            };
            return Err(CliError::invalid("kind", format!("verb `{}` does not apply to a {kind} scenario", verb.name())));
        }
    }
    Ok(report)
}

/// `t₀` for constant protocols; otherwise `t₀`, the breakpoints and the end.
fn audit_times(m: &LindbladModel, run: &RunSpec) -> Vec<f64> {
    let mut ts = vec![run.t0];
    if !m.protocol().is_constant() {
        ts.extend(m.protocol().breakpoint_times());
        ts.push(run.t0 + run.tau);
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Shortest round-trip decimal, switching to exponent form outside `[1e-4, 1e6)`.
fn num(x: f64) -> String {
    let x = x + 0.0;
    if x == 0.0 || !x.is_finite() || (1e-4..1e6).contains(&x.abs()) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

fn validate(report: &mut RunReport, name: &str, l: &LindbladScenario, tol: &ScenarioTolerances, out: &Path) -> Result<(), CliError> {
    let m = &l.model;
    let mut flat = Vec::new();
    for t in audit_times(m, &l.run) {
        let ssi = steady_state(m, t).map_err(CliError::module("steady_state"))?;
        let r = audit(m, t, &ssi, &tol.consistency).map_err(CliError::module("consistency audit"))?;
        report.failures.extend(r.failures().into_iter().map(|f| format!("t = {t}: {f}")));
        flat.push(Value::Object(r.to_flat_json()));
        report.consistency.push(r);
    }
    report.summary.push(format!(
        "{} protocol time(s) audited, {} failing check(s)",
        report.consistency.len(),
        report.failures.len()
    ));
    let doc = json!({
        "scenario": name,
        "kind": "lindblad",
        "passed": report.passed(),
        "failures": report.failures,
        "tolerances": tol.consistency,
        "reports": flat,
    });
    report.write_json(out, "consistency.json", &doc)
}

fn validate_kraus(report: &mut RunReport, name: &str, k: &KrausScenario, out: &Path) -> Result<(), CliError> {
    let solved = invariant_state_with_gap(&k.map);
    let gap = solved.as_ref().map(|x| x.1).ok();
    let pi = match (&k.invariant_state, solved) {
        (Some(p), _) => Some(p.clone()),
        (None, Ok((p, _))) => Some(p),
        (None, Err(e)) => {
            report.failures.push(format!("invariant state: {e}"));
            None
        }
    };
    let dual = match &pi {
        Some(p) => match dual_cptp_check(&k.map, p) {
            Ok(d) => {
                if !d.is_cptp {
                    report.failures.push(format!(
                        "dual map is not CPTP (min Choi eigenvalue {:.3e}, trace residual {:.3e})",
                        d.min_choi_eigenvalue, d.trace_residual
                    ));
                }
                Some(d)
            }
            Err(e) => {
                report.failures.push(format!("dual map: {e}"));
                None
            }
        },
        None => None,
    };
    report.summary.push(format!("Kraus map with {} operators, TP residual {:.3e}", k.map.kraus().len(), k.map.tp_residual()));
    let doc = json!({
        "scenario": name,
        "kind": "kraus",
        "passed": report.passed(),
        "failures": report.failures,
        "tp_residual": k.map.tp_residual(),
        "fixed_point_gap": gap,
        "dual": dual,
    });
    report.write_json(out, "consistency.json", &doc)
}

fn steady(report: &mut RunReport, name: &str, l: &LindbladScenario, out: &Path) -> Result<(), CliError> {
    let m = &l.model;
    let mut states = Vec::new();
    for t in audit_times(m, &l.run) {
        let ssi = steady_state(m, t).map_err(CliError::module("steady_state"))?;
        report.summary.push(format!("t = {t}: gap {:.3e}, residual {:.3e}", ssi.gap, ssi.residual));
        states.push(json!({
            "t": t,
            "pi": matrix_json(ssi.pi.matrix()),
            "eigenvalues": ssi.pi.eigen().values,
            "gap": ssi.gap,
            "residual": ssi.residual,
            "weights": ssi.weights,
        }));
    }
    report.write_json(out, "steady.json", &json!({ "scenario": name, "states": states }))
}

fn grid_states(l: &LindbladScenario) -> Result<Vec<(f64, DensityMatrix)>, CliError> {
    let run = &l.run;
    let states = propagate(&l.model, &l.initial_state, run.t0, run.t0 + run.tau, run.dt)
        .map_err(CliError::module("propagate"))?;
    let last = states.len() - 1;
    Ok(states
        .into_iter()
        .enumerate()
        .filter(|(i, _)| i % run.output_stride == 0 || *i == last)
        .map(|(_, s)| s)
        .collect())
}

fn propagate_states(report: &mut RunReport, l: &LindbladScenario, out: &Path) -> Result<(), CliError> {
    let states = grid_states(l)?;
    let d = l.model.dim();
    let mut csv = String::from("# nonadiabat propagate v1: t, trace, then re/im of rho[i][j] row by row\nt,trace");
    for i in 0..d {
        for j in 0..d {
            let _ = write!(csv, ",re_{i}{j},im_{i}{j}");
        }
    }
    csv.push('\n');
    for (t, rho) in &states {
        let m = rho.matrix();
        let _ = write!(csv, "{},{}", num(*t), num(m.trace().re));
        for i in 0..d {
            for j in 0..d {
                let _ = write!(csv, ",{},{}", num(m[(i, j)].re), num(m[(i, j)].im));
            }
        }
        csv.push('\n');
    }
    report.summary.push(format!("{} states written", states.len()));
    report.write(out, "propagate.csv", &csv)
}

fn rates(report: &mut RunReport, l: &LindbladScenario, tol: &ScenarioTolerances, out: &Path, equivalence: bool) -> Result<(), CliError> {
    let states = grid_states(l)?;
    let series = rates_along(&l.model, &states).map_err(CliError::module("rates"))?;
    let mut csv = String::from(
        "# nonadiabat rates v1: t,S,S_dot,S_ex_relent,S_ex_weights,S_na,equivalence_residual\n\
         t,S,S_dot,S_ex_relent,S_ex_weights,S_na,equivalence_residual\n",
    );
    let opt = |x: Option<f64>| x.map_or(String::new(), num);
    for r in &series {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            num(r.t),
            num(r.s),
            num(r.s_dot),
            num(r.s_ex_dot_relent),
            opt(r.s_ex_dot_weights),
            num(r.s_na_dot),
            opt(r.equivalence_residual())
        );
    }
    report.write(out, "rates.csv", &csv)?;

    let worst = series.iter().min_by(|a, b| a.s_na_dot.total_cmp(&b.s_na_dot)).expect("grid is nonempty");
    report.summary.push(format!("{} points, min S_na_dot {:.6e} at t = {}", series.len(), worst.s_na_dot, worst.t));
    if worst.s_na_dot < -tol.positivity {
        report.failures.push(format!("positivity: S_na_dot = {:.3e} at t = {}", worst.s_na_dot, worst.t));
    }

    if equivalence {
        let mut summary = EquivalenceSummary {
            points: series.len(),
            missing_weights: 0,
            max_residual: 0.0,
            max_scaled_residual: 0.0,
            t_at_max: series[0].t,
            tolerance: tol.equivalence,
            pass: true,
        };
        for r in &series {
            match r.equivalence_residual() {
                None => summary.missing_weights += 1,
                Some(res) => {
                    let scaled = res / (1.0 + r.s_ex_dot_relent.abs());
                    summary.max_residual = summary.max_residual.max(res);
                    if scaled > summary.max_scaled_residual {
                        summary.max_scaled_residual = scaled;
                        summary.t_at_max = r.t;
                    }
                }
            }
        }
        summary.pass = summary.missing_weights == 0 && summary.max_scaled_residual <= tol.equivalence;
        if summary.missing_weights > 0 {
            report.failures.push(format!("equivalence: no privileged weights at {} grid points", summary.missing_weights));
        }
        if summary.max_scaled_residual > tol.equivalence {
            report.failures.push(format!(
                "equivalence: scaled residual {:.3e} at t = {} exceeds {:.1e}",
                summary.max_scaled_residual, summary.t_at_max, tol.equivalence
            ));
        }
        report.summary.push(format!("max equivalence residual {:.3e}", summary.max_residual));
        report.equivalence = Some(summary);
    }
    report.rates = series;
    Ok(())
}

fn trajectories(
    report: &mut RunReport,
    name: &str,
    l: &LindbladScenario,
    tol: &ScenarioTolerances,
    out: &Path,
    event_log: bool,
) -> Result<(), CliError> {
    let run = &l.run;
    if run.n_traj == 0 {
        return Err(CliError::invalid("run.n_traj", "must be positive"));
    }
    let mut config = TrajectoryConfig::new(run.t0, run.tau, run.dt).with_epsilon_mix(run.epsilon_mix);
    config = match run.checkpoint_stride {
        Some(stride) => TrajectoryConfig {
            checkpoint_stride: stride,
            ..config
        },
        None => config.with_checkpoints(10),
    };
    if let Some(refresh) = run.steady_refresh {
        config = config.with_weight_refresh(refresh);
    }
    let schedule = default_schedule(&l.model, &config, None).map_err(CliError::module("weight schedule"))?;
    let sim = Simulation::new(&l.model, &l.initial_state, config, schedule).map_err(CliError::module("trajectory setup"))?;
    let (records, stats) = sim
        .run_ensemble(run.n_traj, run.base_seed)
        .map_err(CliError::module("run_ensemble"))?;

    let k = tol.sigmas;
    let mut checks = serde_json::Map::new();
    if records.len() >= 2 {
        if let Some(ft) = stats.ft {
            let pass = (ft.value - 1.0).abs() <= k * ft.stderr + 1e-12;
            if !pass {
                report.failures.push(format!("fluctuation theorem: E[exp(-ds_na)] = {} +/- {}", ft.value, ft.stderr));
            }
            checks.insert("fluctuation_theorem".into(), json!(pass));
        }
        let jensen = stats.mean_ds_na >= -k * stats.mean_ds_na_stderr - 1e-12;
        if !jensen {
            report.failures.push(format!("mean ds_na = {} +/- {} is negative", stats.mean_ds_na, stats.mean_ds_na_stderr));
        }
        checks.insert("mean_ds_na_nonnegative".into(), json!(jensen));
        let z = stats.max_state_z();
        let unbiased = z <= k;
        if !unbiased {
            report.failures.push(format!("ensemble mean state deviates by {z:.2} standard errors"));
        }
        checks.insert("mean_state_unbiased".into(), json!(unbiased));
        checks.insert("max_state_z".into(), json!(z));
    }
    report.summary.push(format!(
        "{} trajectories, mean ds_na {:.6} +/- {:.6}",
        records.len(),
        stats.mean_ds_na,
        stats.mean_ds_na_stderr
    ));
    if let Some(ft) = stats.ft {
        report.summary.push(format!("E[exp(-ds_na)] = {:.6} +/- {:.6}", ft.value, ft.stderr));
    }

    if event_log {
        let mut csv = String::from("# nonadiabat events v1: traj,t,k,ln_w\ntraj,t,k,ln_w\n");
        for (i, rec) in records.iter().enumerate() {
            for (&(t, jump), ln_w) in rec.events.iter().zip(rec.event_log_weights(sim.weights())) {
                let _ = writeln!(csv, "{i},{},{jump},{}", num(t), num(ln_w));
            }
        }
        report.write(out, "events.csv", &csv)?;
    }
    let doc = json!({
        "scenario": name,
        "n_traj": run.n_traj,
        "base_seed": run.base_seed,
        "config": config,
        "passed": report.passed(),
        "failures": report.failures,
        "checks": checks,
        "stats": stats,
    });
    report.write_json(out, "ensemble.json", &doc)?;
    report.ensemble = Some(stats);
    Ok(())
}

fn kraus_audit(report: &mut RunReport, name: &str, k: &KrausScenario, tol: &ScenarioTolerances, out: &Path) -> Result<(), CliError> {
    let a = audit_map(&k.map, k.invariant_state.clone(), tol.kraus_ratio, &k.states);
    report.failures.extend(a.errors.iter().cloned());
    if let Some(d) = a.dual.filter(|d| !d.is_cptp) {
        report.failures.push(format!("dual map is not CPTP (min Choi eigenvalue {:.3e})", d.min_choi_eigenvalue));
    }
    let mut bound = |what: &str, x: Option<f64>| {
        if let Some(v) = x.filter(|v| !(*v <= tol.kraus)) {
            report.failures.push(format!("{what} {v:.3e} exceeds {:.1e}", tol.kraus));
        }
    };
    bound("relative entropy increase", a.max_delta_d);
    bound("operator/classical gap", a.max_operator_classical_gap);
    bound("mu normalization residual", a.mu_normalization_residual);
    bound("stochastic matrix residual", a.max_stochastic_residual);
    if !a.passed(tol.kraus) && report.failures.is_empty() {
        report.failures.push("audit incomplete".into());
    }
    report.summary.push(format!(
        "{} states, max dD {}, mu {:?}",
        k.states.len(),
        a.max_delta_d.map_or("n/a".into(), |x| format!("{x:.3e}")),
        a.mu.as_deref().unwrap_or(&[])
    ));
    let doc = json!({
        "scenario": name,
        "passed": report.passed(),
        "failures": report.failures,
        "tolerance": tol.kraus,
        "audit": a,
    });
    report.write_json(out, "kraus_audit.json", &doc)?;
    report.kraus = Some(a);
    Ok(())
}
