//! Strict JSON scenario files.
//!
//! Complex matrices are nested arrays of `[re, im]` pairs, row by row.
//! Unknown keys are rejected everywhere.

use std::collections::HashMap;
use std::path::Path;

use nonadiabat::consistency::Tolerances;
use nonadiabat::kraus::KrausMap;
use nonadiabat::linalg::validate_density;
use nonadiabat::model::{Amplitude, Channel, HamiltonianTerm, JumpSpec, LindbladModel, Protocol};
use nonadiabat::random::random_full_rank_density;
use nonadiabat::{CMat, DensityMatrix, C64};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u64 = 1;

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Lindblad,
    Kraus,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[allow(dead_code)]
    schema_version: u64,
    kind: Kind,
    #[serde(default)]
    name: Option<String>,
    dim: usize,
    #[serde(default)]
    hamiltonian: Option<RawMatrix>,
    #[serde(default)]
    hamiltonian_terms: Vec<RawTerm>,
    #[serde(default)]
    channels: Vec<RawChannel>,
    #[serde(default)]
    jumps: Vec<RawJump>,
    #[serde(default)]
    initial_state: Option<RawMatrix>,
    #[serde(default)]
    run: Option<RunSpec>,
    #[serde(default)]
    tolerances: RawTolerances,
    #[serde(default)]
    time_reversal_check: Option<bool>,
    #[serde(default)]
    kraus: Vec<RawMatrix>,
    #[serde(default)]
    invariant_state: Option<RawMatrix>,
    #[serde(default)]
    states: Vec<RawMatrix>,
    #[serde(default)]
    random_states: Option<RandomStates>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    channel: String,
    matrix: RawMatrix,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    name: String,
    breakpoints: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJump {
    label: String,
    base: RawMatrix,
    #[serde(default)]
    amplitude: Option<f64>,
    #[serde(default)]
    amplitude_channel: Option<String>,
    #[serde(default)]
    pair: Option<String>,
    #[serde(default)]
    entropy_flow: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    privileged: Option<f64>,
    detailed_balance: Option<f64>,
    time_reversal: Option<f64>,
    modular: Option<f64>,
    log_identity: Option<f64>,
    equivalence: Option<f64>,
    positivity: Option<f64>,
    kraus_ratio: Option<f64>,
    kraus: Option<f64>,
    sigmas: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomStates {
    count: usize,
    #[serde(default)]
    seed: u64,
}

/// Time grid and ensemble parameters.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub t0: f64,
    pub tau: f64,
    pub dt: f64,
    #[serde(default = "default_ntraj")]
    pub n_traj: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Steps between recorded trajectory checkpoints; ten evenly spaced when absent.
    #[serde(default)]
    pub checkpoint_stride: Option<usize>,
    /// Interval between steady-state re-solves along a driven protocol.
    #[serde(default)]
    pub steady_refresh: Option<f64>,
    #[serde(default)]
    pub epsilon_mix: f64,
    /// Rows of `rates.csv` and `propagate.csv` are written every this many steps.
    #[serde(default = "default_stride")]
    pub output_stride: usize,
}

fn default_ntraj() -> usize {
    1000
}

fn default_stride() -> usize {
    1
}

/// Every tolerance a verb consults, after scenario values and overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioTolerances {
    pub consistency: Tolerances,
    /// Bound on `|Ṡ_ex(relative entropy) − Ṡ_ex(weights)| / (1 + |Ṡ_ex|)`.
    pub equivalence: f64,
    /// Allowed negative excursion of `Ṡ_na`.
    pub positivity: f64,
    /// Relative tolerance for extracting `μ_k`.
    pub kraus_ratio: f64,
    /// Bound on monotonicity violations and classical/operator gaps.
    pub kraus: f64,
    /// Standard errors allowed in ensemble checks.
    pub sigmas: f64,
}

impl Default for ScenarioTolerances {
    fn default() -> Self {
        Self {
            consistency: Tolerances::default(),
            equivalence: 1e-9,
            positivity: 1e-9,
            kraus_ratio: 1e-9,
            kraus: 1e-9,
            sigmas: 3.0,
        }
    }
}

impl ScenarioTolerances {
    pub const KEYS: [&'static str; 10] = [
        "privileged",
        "detailed_balance",
        "time_reversal",
        "modular",
        "log_identity",
        "equivalence",
        "positivity",
        "kraus_ratio",
        "kraus",
        "sigmas",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "privileged" => &mut self.consistency.privileged,
            "detailed_balance" => &mut self.consistency.detailed_balance,
            "time_reversal" => &mut self.consistency.time_reversal,
            "modular" => &mut self.consistency.modular,
            "log_identity" => &mut self.consistency.log_identity,
            "equivalence" => &mut self.equivalence,
            "positivity" => &mut self.positivity,
            "kraus_ratio" => &mut self.kraus_ratio,
            "kraus" => &mut self.kraus,
            "sigmas" => &mut self.sigmas,
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(CliError::invalid(format!("tolerances.{key}"), format!("{value} is not a nonnegative number")));
        }
        let slot = self.slot(key).ok_or_else(|| {
            CliError::invalid(
                "--tol-override",
                format!("unknown tolerance `{key}`; expected one of {}", Self::KEYS.join(", ")),
            )
        })?;
        *slot = value;
        Ok(())
    }

    fn from_raw(raw: &RawTolerances) -> Result<Self, CliError> {
        let mut t = Self::default();
        let pairs = [
            ("privileged", raw.privileged),
            ("detailed_balance", raw.detailed_balance),
            ("time_reversal", raw.time_reversal),
            ("modular", raw.modular),
            ("log_identity", raw.log_identity),
            ("equivalence", raw.equivalence),
            ("positivity", raw.positivity),
            ("kraus_ratio", raw.kraus_ratio),
            ("kraus", raw.kraus),
            ("sigmas", raw.sigmas),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                t.set(key, v)?;
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone)]
pub struct LindbladScenario {
    pub model: LindbladModel,
    pub initial_state: DensityMatrix,
    pub run: RunSpec,
}

#[derive(Debug, Clone)]
pub struct KrausScenario {
    pub map: KrausMap,
    pub invariant_state: Option<DensityMatrix>,
    pub states: Vec<DensityMatrix>,
}

#[derive(Debug, Clone)]
pub enum Body {
    Lindblad(LindbladScenario),
    Kraus(KrausScenario),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    pub tolerances: ScenarioTolerances,
    pub body: Body,
}

impl Scenario {
    pub fn kind(&self) -> Kind {
        match self.body {
            Body::Lindblad(_) => Kind::Lindblad,
            Body::Kraus(_) => Kind::Kraus,
        }
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let default_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    parse_scenario_str(&text, &default_name)
}

pub fn parse_scenario_str(text: &str, default_name: &str) -> Result<Scenario, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(CliError::parse)?;
    match value.get("schema_version") {
        None => return Err(CliError::invalid("schema_version", "missing")),
        Some(v) if v.as_u64() != Some(SCHEMA_VERSION) => {
            return Err(CliError::SchemaVersionMismatch {
                found: v.to_string(),
                expected: SCHEMA_VERSION,
            });
        }
        Some(_) => {}
    }
    let raw: RawScenario = serde_json::from_str(text).map_err(CliError::parse)?;
    build(raw, default_name)
}

fn build(raw: RawScenario, default_name: &str) -> Result<Scenario, CliError> {
    if raw.dim == 0 {
        return Err(CliError::invalid("dim", "must be positive"));
    }
    let name = raw.name.clone().unwrap_or_else(|| default_name.to_string());
    let tolerances = ScenarioTolerances::from_raw(&raw.tolerances)?;
    let body = match raw.kind {
        Kind::Lindblad => Body::Lindblad(build_lindblad(&raw)?),
        Kind::Kraus => Body::Kraus(build_kraus(&raw)?),
    };
    Ok(Scenario {
        name,
        dim: raw.dim,
        tolerances,
        body,
    })
}

fn matrix(field: &str, raw: &RawMatrix, dim: usize) -> Result<CMat, CliError> {
    if raw.len() != dim || raw.iter().any(|row| row.len() != dim) {
        return Err(CliError::invalid(field, format!("expected a {dim}x{dim} matrix")));
    }
    if raw.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::invalid(field, "non-finite entry"));
    }
    Ok(CMat::from_fn(dim, dim, |i, j| C64::new(raw[i][j][0], raw[i][j][1])))
}

fn density(field: &str, raw: &RawMatrix, dim: usize) -> Result<DensityMatrix, CliError> {
    validate_density(&matrix(field, raw, dim)?, 1e-10).map_err(|e| CliError::invalid(field, e.to_string()))
}

fn reject_present(field: &str, present: bool, kind: &str) -> Result<(), CliError> {
    if present {
        Err(CliError::invalid(field, format!("not allowed for kind `{kind}`")))
    } else {
        Ok(())
    }
}

fn build_lindblad(raw: &RawScenario) -> Result<LindbladScenario, CliError> {
    reject_present("kraus", !raw.kraus.is_empty(), "lindblad")?;
    reject_present("invariant_state", raw.invariant_state.is_some(), "lindblad")?;
    reject_present("states", !raw.states.is_empty(), "lindblad")?;
    reject_present("random_states", raw.random_states.is_some(), "lindblad")?;
    let d = raw.dim;
    let run = raw.run.ok_or_else(|| CliError::invalid("run", "missing"))?;
    if !(run.tau > 0.0 && run.tau.is_finite() && run.t0.is_finite()) {
        return Err(CliError::invalid("run.tau", "must be positive and finite"));
    }
    if !(run.dt > 0.0 && run.dt.is_finite()) {
        return Err(CliError::invalid("run.dt", "must be positive"));
    }
    if run.output_stride == 0 || run.checkpoint_stride == Some(0) {
        return Err(CliError::invalid("run", "strides must be positive"));
    }
    if !(0.0..=1.0).contains(&run.epsilon_mix) {
        return Err(CliError::invalid("run.epsilon_mix", "must lie in [0, 1]"));
    }

    let h = match &raw.hamiltonian {
        Some(m) => matrix("hamiltonian", m, d)?,
        None => CMat::zeros(d, d),
    };
    let mut channels = Vec::with_capacity(raw.channels.len());
    for (i, ch) in raw.channels.iter().enumerate() {
        channels.push(
            Channel::new(ch.name.clone(), ch.breakpoints.clone())
                .map_err(|e| CliError::invalid(format!("channels[{i}]"), e.to_string()))?,
        );
    }
    let protocol = Protocol::new(run.t0, run.t0 + run.tau, channels)
        .map_err(|e| CliError::invalid("channels", e.to_string()))?;
    let known = |name: &str| protocol.channel(name).is_some();

    let mut terms = Vec::with_capacity(raw.hamiltonian_terms.len());
    for (i, term) in raw.hamiltonian_terms.iter().enumerate() {
        let field = format!("hamiltonian_terms[{i}]");
        if !known(&term.channel) {
            return Err(CliError::UnresolvedReference {
                field: format!("{field}.channel"),
                name: term.channel.clone(),
            });
        }
        terms.push(HamiltonianTerm {
            channel: term.channel.clone(),
            matrix: matrix(&format!("{field}.matrix"), &term.matrix, d)?,
        });
    }

    let labels: HashMap<&str, usize> = raw.jumps.iter().enumerate().map(|(k, j)| (j.label.as_str(), k)).collect();
    if labels.len() != raw.jumps.len() {
        return Err(CliError::invalid("jumps", "duplicate jump label"));
    }
    let mut jumps = Vec::with_capacity(raw.jumps.len());
    for (k, j) in raw.jumps.iter().enumerate() {
        let field = format!("jumps[{k}]");
        let amplitude = match (&j.amplitude, &j.amplitude_channel) {
            (Some(_), Some(_)) => {
                return Err(CliError::invalid(field, "give either `amplitude` or `amplitude_channel`"));
            }
            (Some(a), None) => Amplitude::Constant(*a),
            (None, Some(name)) if !known(name) => {
                return Err(CliError::UnresolvedReference {
                    field: format!("{field}.amplitude_channel"),
                    name: name.clone(),
                });
            }
            (None, Some(name)) => Amplitude::Channel(name.clone()),
            (None, None) => Amplitude::Constant(1.0),
        };
        let mut spec = JumpSpec::new(j.label.clone(), matrix(&format!("{field}.base"), &j.base, d)?, amplitude);
        if let Some(partner) = &j.pair {
            let p = *labels.get(partner.as_str()).ok_or_else(|| CliError::UnresolvedReference {
                field: format!("{field}.pair"),
                name: partner.clone(),
            })?;
            spec = spec.paired(p, j.entropy_flow);
        } else if j.entropy_flow != 0.0 {
            return Err(CliError::invalid(format!("{field}.entropy_flow"), "requires `pair`"));
        }
        jumps.push(spec);
    }

    let model = LindbladModel::new(h, terms, jumps, protocol)
        .map_err(|e| CliError::invalid("model", e.to_string()))?
        .with_time_reversal_check(raw.time_reversal_check.unwrap_or(true));
    let initial_state = match &raw.initial_state {
        Some(m) => density("initial_state", m, d)?,
        None => DensityMatrix::maximally_mixed(d),
    };
    Ok(LindbladScenario {
        model,
        initial_state,
        run,
    })
}

fn build_kraus(raw: &RawScenario) -> Result<KrausScenario, CliError> {
    reject_present("hamiltonian", raw.hamiltonian.is_some(), "kraus")?;
    reject_present("hamiltonian_terms", !raw.hamiltonian_terms.is_empty(), "kraus")?;
    reject_present("channels", !raw.channels.is_empty(), "kraus")?;
    reject_present("jumps", !raw.jumps.is_empty(), "kraus")?;
    reject_present("initial_state", raw.initial_state.is_some(), "kraus")?;
    reject_present("run", raw.run.is_some(), "kraus")?;
    reject_present("time_reversal_check", raw.time_reversal_check.is_some(), "kraus")?;
    let d = raw.dim;
    if raw.kraus.is_empty() {
        return Err(CliError::invalid("kraus", "empty Kraus list"));
    }
    let ops = raw
        .kraus
        .iter()
        .enumerate()
        .map(|(k, m)| matrix(&format!("kraus[{k}]"), m, d))
        .collect::<Result<Vec<_>, _>>()?;
    let map = KrausMap::new(ops).map_err(|e| CliError::invalid("kraus", e.to_string()))?;
    let invariant_state = raw
        .invariant_state
        .as_ref()
        .map(|m| density("invariant_state", m, d))
        .transpose()?;
    let mut states = raw
        .states
        .iter()
        .enumerate()
        .map(|(i, m)| density(&format!("states[{i}]"), m, d))
        .collect::<Result<Vec<_>, _>>()?;
    let random = raw.random_states.or(if states.is_empty() {
        Some(RandomStates { count: 5, seed: 0 })
    } else {
        None
    });
    if let Some(r) = random {
        let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
        states.extend((0..r.count).map(|_| random_full_rank_density(d, 0.2, &mut rng)));
    }
    Ok(KrausScenario {
        map,
        invariant_state,
        states,
    })
}
