//! Quantum-jump unraveling of the master equation with stochastic entropy
//! bookkeeping.
//!
//! Each step of length `dt` draws one uniform variate. Jump `k` fires with
//! probability `p_k = Tr[L_k†L_kϱ] dt`; otherwise the conditioned state
//! evolves under `K = I − i dt ℋ`, `ℋ = H − (i/2) Σ_k L_k†L_k`, as
//! `KϱK†/Tr[KϱK†]`. The stochastic system entropy is `s = −Tr[ϱ ln ρ]` with
//! `ρ` the unconditioned state on the same grid, and every jump adds
//! `ln ϖ_k` to the excess entropy.

mod stats;

pub use stats::{
    bootstrap_mean, fluctuation_functional, CheckpointStat, EnsembleStats, FluctuationEstimate,
    WindowStat, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_part, identity, log_from_eig, trace_product_re, trace_re, CMat, DensityMatrix, LOG_FLOOR};
use crate::model::{propagate, step_grid, steady_state, LindbladModel, ModelAt, SteadyStateInfo};

/// Upper bound on the total jump probability of one step.
pub const MAX_STEP_PROBABILITY: f64 = 0.1;

/// Draws `|p_m⟩⟨p_m|` with probability equal to the eigenvalue `P_m` of `ρ₀`.
pub fn sample_initial_pure_state<R: Rng + ?Sized>(rho0: &DensityMatrix, rng: &mut R) -> DensityMatrix {
    let eig = rho0.eigen();
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut chosen = eig.dim() - 1;
    for (m, &p) in eig.values.iter().enumerate() {
        cumulative += p.max(0.0);
        if u < cumulative {
            chosen = m;
            break;
        }
    }
    let v = eig.vector(chosen);
    DensityMatrix::from_trusted(&v * v.adjoint())
}

/// The conditioned state `ϱ_t` together with the unconditioned `ρ_t`.
#[derive(Debug, Clone)]
pub struct ConditionedState {
    pub rho_c: DensityMatrix,
    pub rho_u: DensityMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepIncrements {
    pub jump: Option<usize>,
    pub ds_ex: f64,
    pub ds: f64,
}

/// Operators needed for one step at a frozen protocol value.
#[derive(Debug, Clone)]
struct StepOps {
    no_jump: CMat,
    no_jump_adj: CMat,
    jumps: Vec<CMat>,
    jumps_adj: Vec<CMat>,
    products: Vec<CMat>,
}

impl StepOps {
    fn new(at: &ModelAt, dt: f64) -> Self {
        let d = at.dim();
        let no_jump = identity(d) - at.effective_hamiltonian() * c(0.0, dt);
        Self {
            no_jump_adj: no_jump.adjoint(),
            no_jump,
            jumps_adj: at.jumps.iter().map(|l| l.adjoint()).collect(),
            jumps: at.jumps.clone(),
            products: (0..at.jumps.len()).map(|k| at.jump_product(k).clone()).collect(),
        }
    }
}

struct Workspace {
    tmp: CMat,
    next: CMat,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self {
            tmp: CMat::zeros(d, d),
            next: CMat::zeros(d, d),
        }
    }
}

/// Advances `rho` in place by one step; returns the jump that fired.
fn advance(ops: &StepOps, rho: &mut CMat, dt: f64, u: f64, ws: &mut Workspace) -> Result<Option<usize>> {
    let mut total = 0.0;
    let mut fired = None;
    for (k, product) in ops.products.iter().enumerate() {
        let p = trace_product_re(product, rho).max(0.0) * dt;
        if fired.is_none() && u < total + p {
            fired = Some(k);
        }
        total += p;
    }
    if total >= MAX_STEP_PROBABILITY {
        return Err(Error::StepTooLarge { total });
    }
    let (left, right) = match fired {
        Some(k) => (&ops.jumps[k], &ops.jumps_adj[k]),
        None => (&ops.no_jump, &ops.no_jump_adj),
    };
    left.mul_to(rho, &mut ws.tmp);
    ws.tmp.mul_to(right, &mut ws.next);
    let norm = trace_re(&ws.next);
    ws.next.unscale_mut(norm);
    std::mem::swap(rho, &mut ws.next);
    Ok(fired)
}

fn log_weight(weights: &[Option<f64>], k: usize) -> Result<f64> {
    weights
        .get(k)
        .copied()
        .flatten()
        .map(f64::ln)
        .ok_or(Error::MissingWeights { index: k })
}

fn checked_log(rho: &DensityMatrix) -> Result<CMat> {
    let eig = rho.eigen();
    log_from_eig(&eig, LOG_FLOOR).map_err(|_| Error::SingularState {
        min_eigenvalue: eig.min(),
    })
}

/// One step of the unraveling at protocol time `t`, co-evolving the
/// unconditioned state with one RK4 step.
pub fn trajectory_step<R: Rng + ?Sized>(
    state: &ConditionedState,
    m: &LindbladModel,
    t: f64,
    dt: f64,
    ssi: &SteadyStateInfo,
    rng: &mut R,
) -> Result<(ConditionedState, StepIncrements)> {
    m.protocol().check(t + dt)?;
    let at = m.at(t)?;
    let ops = StepOps::new(&at, dt);
    let mut rho = state.rho_c.matrix().clone();
    let mut ws = Workspace::new(at.dim());
    let jump = advance(&ops, &mut rho, dt, rng.random(), &mut ws)?;
    let ds_ex = match jump {
        Some(k) => log_weight(&ssi.weights, k)?,
        None => 0.0,
    };
    let next_u = crate::model::rk4_step(m, t, state.rho_u.matrix(), dt)?;
    let rho_u = crate::model::certify_state(t + dt, &next_u)?;
    let rho_c = DensityMatrix::from_trusted(hermitian_part(&rho));
    let s_before = -trace_product_re(state.rho_c.matrix(), &checked_log(&state.rho_u)?);
    let s_after = -trace_product_re(rho_c.matrix(), &checked_log(&rho_u)?);
    Ok((
        ConditionedState { rho_c, rho_u },
        StepIncrements {
            jump,
            ds_ex,
            ds: s_after - s_before,
        },
    ))
}

/// Privileged weights as a piecewise-constant function of time.
#[derive(Debug, Clone, Serialize)]
pub struct WeightSchedule {
    /// `(t, weights)` sorted by time; each entry holds until the next.
    pub entries: Vec<(f64, Vec<Option<f64>>)>,
}

impl WeightSchedule {
    pub fn constant(weights: Vec<Option<f64>>) -> Self {
        Self {
            entries: vec![(f64::NEG_INFINITY, weights)],
        }
    }

    /// Re-extracts the weights at `t0`, at protocol breakpoints inside
    /// `[t0, t1]`, and every `refresh` time units.
    pub fn build(m: &LindbladModel, t0: f64, t1: f64, refresh: Option<f64>) -> Result<Self> {
        let mut times = vec![t0];
        times.extend(m.protocol().breakpoint_times().into_iter().filter(|&t| t > t0 && t < t1));
        if let Some(r) = refresh {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument(format!("refresh interval must be positive, got {r}")));
            }
            let mut t = t0 + r;
            while t < t1 {
                times.push(t);
                t += r;
            }
        }
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let entries = times
            .into_iter()
            .map(|t| Ok((t, steady_state(m, t)?.weights)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { entries })
    }

    pub fn at(&self, t: f64) -> &[Option<f64>] {
        let idx = self.entries.partition_point(|(s, _)| *s <= t + 1e-12);
        &self.entries[idx.saturating_sub(1)].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryConfig {
    pub t0: f64,
    pub tau: f64,
    pub dt: f64,
    /// Conditioned states and `s(t)` are recorded every `checkpoint_stride` steps
    /// and at the final time. The default records only the two endpoints.
    pub checkpoint_stride: usize,
    /// `ρ₀ → (1 − ε)ρ₀ + εI/d` before anything else.
    pub epsilon_mix: f64,
    /// Weight refresh interval for time-dependent protocols.
    pub weight_refresh: Option<f64>,
}

impl TrajectoryConfig {
    pub fn new(t0: f64, tau: f64, dt: f64) -> Self {
        Self {
            t0,
            tau,
            dt,
            checkpoint_stride: usize::MAX,
            epsilon_mix: 0.0,
            weight_refresh: None,
        }
    }

    pub fn with_checkpoints(mut self, count: usize) -> Self {
        let steps = ((self.tau / self.dt) - 1e-9).ceil().max(1.0) as usize;
        self.checkpoint_stride = (steps / count.max(1)).max(1);
        self
    }

    pub fn with_epsilon_mix(mut self, epsilon: f64) -> Self {
        self.epsilon_mix = epsilon;
        self
    }

    pub fn with_weight_refresh(mut self, refresh: f64) -> Self {
        self.weight_refresh = Some(refresh);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub dt: f64,
    /// `(t, k)`: jump `k` fired during the step starting at `t`.
    pub events: Vec<(f64, usize)>,
    /// `(t, s(t))` at the checkpoints.
    pub s_series: Vec<(f64, f64)>,
    pub ds_ex_total: f64,
    pub ds_na_total: f64,
    /// Excess entropy collected between consecutive checkpoints.
    #[serde(skip)]
    pub window_ds_ex: Vec<f64>,
    /// Conditioned states at the checkpoints.
    #[serde(skip)]
    pub checkpoint_states: Vec<CMat>,
}

impl TrajectoryRecord {
    pub fn s_initial(&self) -> f64 {
        self.s_series.first().map_or(0.0, |x| x.1)
    }

    pub fn s_final(&self) -> f64 {
        self.s_series.last().map_or(0.0, |x| x.1)
    }

    /// `ln ϖ_k` for each event, in order.
    pub fn event_log_weights(&self, weights: &WeightSchedule) -> Vec<f64> {
        self.events
            .iter()
            .map(|&(t, k)| weights.at(t)[k].map_or(f64::NAN, f64::ln))
            .collect()
    }
}

/// Everything shared by the trajectories of one ensemble: the step grid, the
/// unconditioned solution, per-step operators and the weight schedule.
pub struct Simulation {
    config: TrajectoryConfig,
    rho0: DensityMatrix,
    steps: usize,
    h: f64,
    background: Vec<(f64, DensityMatrix)>,
    ops: Vec<StepOps>,
    op_index: Vec<usize>,
    step_log_weights: Vec<Vec<Option<f64>>>,
    checkpoints: Vec<usize>,
    checkpoint_logs: Vec<CMat>,
    weights: WeightSchedule,
}

impl Simulation {
    pub fn new(m: &LindbladModel, rho0: &DensityMatrix, config: TrajectoryConfig, weights: WeightSchedule) -> Result<Self> {
        if !(config.epsilon_mix >= 0.0 && config.epsilon_mix < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon_mix must lie in [0, 1), got {}",
                config.epsilon_mix
            )));
        }
        if config.checkpoint_stride == 0 {
            return Err(Error::InvalidArgument("checkpoint stride must be positive".into()));
        }
        let rho0 = if config.epsilon_mix > 0.0 {
            rho0.mixed_with_identity(config.epsilon_mix)
        } else {
            rho0.clone()
        };
        let t1 = config.t0 + config.tau;
        let (steps, h) = step_grid(config.t0, t1, config.dt)?;
        let background = propagate(m, &rho0, config.t0, t1, config.dt)?;
        let constant = m.protocol().is_constant();
        let mut ops = Vec::new();
        let mut op_index = Vec::with_capacity(steps);
        for n in 0..steps {
            if constant && n > 0 {
                op_index.push(0);
                continue;
            }
            ops.push(StepOps::new(&m.at(background[n].0)?, h));
            op_index.push(ops.len() - 1);
        }
        let step_log_weights = (0..steps)
            .map(|n| {
                weights
                    .at(background[n].0)
                    .iter()
                    .map(|w| w.map(f64::ln))
                    .collect()
            })
            .collect();
        let mut checkpoints: Vec<usize> = (0..=steps).step_by(config.checkpoint_stride).collect();
        if *checkpoints.last().expect("non-empty") != steps {
            checkpoints.push(steps);
        }
        let checkpoint_logs = checkpoints
            .iter()
            .map(|&n| checked_log(&background[n].1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            rho0,
            steps,
            h,
            background,
            ops,
            op_index,
            step_log_weights,
            checkpoints,
            checkpoint_logs,
            weights,
        })
    }

    pub fn config(&self) -> &TrajectoryConfig {
        &self.config
    }

    /// The (possibly ε-mixed) initial state.
    pub fn initial_state(&self) -> &DensityMatrix {
        &self.rho0
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Unconditioned solution on the step grid.
    pub fn background(&self) -> &[(f64, DensityMatrix)] {
        &self.background
    }

    /// Grid indices of the checkpoints.
    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    pub fn weights(&self) -> &WeightSchedule {
        &self.weights
    }

    pub(crate) fn step_ops_products(&self, n: usize) -> &[CMat] {
        &self.ops[self.op_index[n]].products
    }

    pub(crate) fn step_log_weights(&self, n: usize) -> &[Option<f64>] {
        &self.step_log_weights[n]
    }

    pub fn run(&self, seed: u64) -> Result<TrajectoryRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rho = sample_initial_pure_state(&self.rho0, &mut rng).into_matrix();
        let d = rho.nrows();
        let mut ws = Workspace::new(d);
        let mut events = Vec::new();
        let mut s_series = Vec::with_capacity(self.checkpoints.len());
        let mut window_ds_ex = Vec::with_capacity(self.checkpoints.len().saturating_sub(1));
        let mut checkpoint_states = Vec::with_capacity(self.checkpoints.len());
        let mut ds_ex_total = 0.0;
        let mut window = 0.0;
        let mut next_cp = 0;
        for n in 0..=self.steps {
            if self.checkpoints[next_cp] == n {
                let s = -trace_product_re(&rho, &self.checkpoint_logs[next_cp]);
                s_series.push((self.background[n].0, s));
                checkpoint_states.push(rho.clone());
                if next_cp > 0 {
                    window_ds_ex.push(window);
                    window = 0.0;
                }
                next_cp += 1;
            }
            if n == self.steps {
                break;
            }
            let ops = &self.ops[self.op_index[n]];
            if let Some(k) = advance(ops, &mut rho, self.h, rng.random(), &mut ws)? {
                let t = self.background[n].0;
                let lw = self.step_log_weights[n]
                    .get(k)
                    .copied()
                    .flatten()
                    .ok_or(Error::MissingWeights { index: k })?;
                events.push((t, k));
                ds_ex_total += lw;
                window += lw;
            }
        }
        let s_initial = s_series[0].1;
        let s_final = s_series[s_series.len() - 1].1;
        Ok(TrajectoryRecord {
            seed,
            dt: self.h,
            events,
            s_series,
            ds_ex_total,
            ds_na_total: (s_final - s_initial) + ds_ex_total,
            window_ds_ex,
            checkpoint_states,
        })
    }

    /// Runs trajectories `base_seed + i` for `i < n`, in parallel, returning
    /// the records in index order.
    pub fn run_many(&self, n: usize, base_seed: u64) -> Result<Vec<TrajectoryRecord>> {
        if n == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.run(base_seed.wrapping_add(i)))
            .collect()
    }

    pub fn run_ensemble(&self, n: usize, base_seed: u64) -> Result<(Vec<TrajectoryRecord>, EnsembleStats)> {
        let records = self.run_many(n, base_seed)?;
        let stats = EnsembleStats::from_records(self, &records)?;
        Ok((records, stats))
    }
}

/// Weight schedule for `m` over the horizon of `config`: the given steady
/// state for constant protocols, periodic re-extraction otherwise.
pub fn default_schedule(m: &LindbladModel, config: &TrajectoryConfig, ssi: Option<&SteadyStateInfo>) -> Result<WeightSchedule> {
    if m.protocol().is_constant() {
        let weights = match ssi {
            Some(s) => s.weights.clone(),
            None => steady_state(m, config.t0)?.weights,
        };
        Ok(WeightSchedule::constant(weights))
    } else {
        WeightSchedule::build(m, config.t0, config.t0 + config.tau, config.weight_refresh)
    }
}

pub fn run_trajectory(
    m: &LindbladModel,
    rho0: &DensityMatrix,
    config: TrajectoryConfig,
    ssi: &SteadyStateInfo,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let schedule = default_schedule(m, &config, Some(ssi))?;
    Simulation::new(m, rho0, config, schedule)?.run(seed)
}

pub fn run_ensemble(
    m: &LindbladModel,
    rho0: &DensityMatrix,
    config: TrajectoryConfig,
    n: usize,
    base_seed: u64,
) -> Result<EnsembleStats> {
    let schedule = default_schedule(m, &config, None)?;
    Ok(Simulation::new(m, rho0, config, schedule)?.run_ensemble(n, base_seed)?.1)
}
