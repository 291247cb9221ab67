//! Deterministic entropy functionals and rates (`k_B = 1`).
//!
//! `Ṡ = −Tr[ℒρ ln ρ]`, `Ṡ_ex = Tr[ℒρ ln π]` (relative-entropy form) or
//! `Σ_k Tr[L_k†L_kρ] ln ϖ_k` (weight form), and `Ṡ_na = Ṡ + Ṡ_ex`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    frob, hermitian_eig, hermitian_part, log_from_eig, matrix_log_pd, trace_product_re, CMat,
    DensityMatrix, HermitianEigen, LOG_FLOOR,
};
use crate::model::{LindbladModel, ModelAt, SteadyStateInfo};

/// Weight a state may carry outside the support of the reference state
/// before the relative entropy is declared infinite.
pub const SUPPORT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyRates {
    pub t: f64,
    pub s: f64,
    pub s_dot: f64,
    pub s_ex_dot_relent: f64,
    /// Absent when the steady state carries no privileged weights.
    pub s_ex_dot_weights: Option<f64>,
    pub s_na_dot: f64,
}

impl EntropyRates {
    /// `|Ṡ_ex(relative entropy) − Ṡ_ex(weights)|`.
    pub fn equivalence_residual(&self) -> Option<f64> {
        self.s_ex_dot_weights.map(|w| (self.s_ex_dot_relent - w).abs())
    }
}

fn entropy_of(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&w| w > LOG_FLOOR)
        .map(|&w| -w * w.ln())
        .sum()
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of(&rho.eigen().values)
}

/// `Tr[χ ln χ] − Tr[χ ln φ]`, or `+∞` when `χ` has weight outside the
/// support of `φ`.
pub fn relative_entropy(chi: &DensityMatrix, phi: &DensityMatrix) -> f64 {
    relative_entropy_to(chi.matrix(), &phi.eigen())
}

pub(crate) fn relative_entropy_to(chi: &CMat, phi: &HermitianEigen) -> f64 {
    let own = -entropy_of(&crate::linalg::DensityMatrix::from_trusted(hermitian_part(chi)).eigen().values);
    let mut cross = 0.0;
    for (j, &mu) in phi.values.iter().enumerate() {
        let v = phi.vector(j);
        let weight = (v.adjoint() * chi * &v)[(0, 0)].re;
        if mu <= LOG_FLOOR {
            if weight > SUPPORT_TOL {
                return f64::INFINITY;
            }
            continue;
        }
        cross += weight * mu.ln();
    }
    own - cross
}

fn checked_log(rho: &DensityMatrix) -> Result<CMat> {
    let eig = rho.eigen();
    log_from_eig(&eig, LOG_FLOOR).map_err(|_| Error::SingularState {
        min_eigenvalue: eig.min(),
    })
}

fn pi_log(ssi: &SteadyStateInfo) -> Result<CMat> {
    matrix_log_pd(ssi.pi.matrix(), LOG_FLOOR)
}

/// `Ṡ = −Tr[ℒρ ln ρ]`.
pub fn system_entropy_rate(m: &LindbladModel, t: f64, rho: &DensityMatrix) -> Result<f64> {
    let log_rho = checked_log(rho)?;
    let drho = m.at(t)?.apply(rho.matrix());
    Ok(-trace_product_re(&drho, &log_rho))
}

/// `Tr[ℒρ ln π]`.
pub fn excess_rate_relative_entropy(
    m: &LindbladModel,
    t: f64,
    rho: &DensityMatrix,
    ssi: &SteadyStateInfo,
) -> Result<f64> {
    let drho = m.at(t)?.apply(rho.matrix());
    Ok(trace_product_re(&drho, &pi_log(ssi)?))
}

/// `Σ_k Tr[L_k†L_kρ] ln ϖ_k`; vanishing jump operators are skipped.
pub fn excess_rate_weights(
    m: &LindbladModel,
    t: f64,
    rho: &DensityMatrix,
    ssi: &SteadyStateInfo,
) -> Result<f64> {
    weights_rate(&m.at(t)?, rho.matrix(), &ssi.weights)
}

pub(crate) fn weights_rate(at: &ModelAt, rho: &CMat, weights: &[Option<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..at.jumps.len() {
        if frob(&at.jumps[k]) == 0.0 {
            continue;
        }
        let w = weights
            .get(k)
            .copied()
            .flatten()
            .ok_or(Error::MissingWeights { index: k })?;
        total += at.jump_rate(k, rho) * w.ln();
    }
    Ok(total)
}

/// All rates at one state. The weight form is filled in whenever the
/// steady state carries weights for every non-vanishing jump.
pub fn nonadiabatic_rate(
    m: &LindbladModel,
    t: f64,
    rho: &DensityMatrix,
    ssi: &SteadyStateInfo,
) -> Result<EntropyRates> {
    let at = m.at(t)?;
    rates_with(&at, rho, &pi_log(ssi)?, &ssi.weights)
}

pub(crate) fn rates_with(
    at: &ModelAt,
    rho: &DensityMatrix,
    log_pi: &CMat,
    weights: &[Option<f64>],
) -> Result<EntropyRates> {
    let eig = rho.eigen();
    let log_rho = log_from_eig(&eig, LOG_FLOOR).map_err(|_| Error::SingularState {
        min_eigenvalue: eig.min(),
    })?;
    let drho = at.apply(rho.matrix());
    let s_dot = -trace_product_re(&drho, &log_rho);
    let s_ex_dot_relent = trace_product_re(&drho, log_pi);
    let s_ex_dot_weights = match weights_rate(at, rho.matrix(), weights) {
        Ok(x) => Some(x),
        Err(Error::MissingWeights { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(EntropyRates {
        t: at.t,
        s: entropy_of(&eig.values),
        s_dot,
        s_ex_dot_relent,
        s_ex_dot_weights,
        s_na_dot: s_dot + s_ex_dot_relent,
    })
}

/// Rates along a sequence of states, re-solving the steady state only when
/// the protocol is time dependent.
pub fn rates_along(m: &LindbladModel, states: &[(f64, DensityMatrix)]) -> Result<Vec<EntropyRates>> {
    let frozen = if m.protocol().is_constant() {
        let t0 = states.first().map_or(m.protocol().start(), |s| s.0);
        let ssi = crate::model::steady_state(m, t0)?;
        Some((pi_log(&ssi)?, ssi.weights))
    } else {
        None
    };
    states
        .iter()
        .map(|(t, rho)| {
            let at = m.at(*t)?;
            match &frozen {
                Some((log_pi, weights)) => rates_with(&at, rho, log_pi, weights),
                None => {
                    let ssi = crate::model::steady_state(m, *t)?;
                    rates_with(&at, rho, &pi_log(&ssi)?, &ssi.weights)
                }
            }
        })
        .collect()
}

/// `1e-4 / ‖ℒ(λ_t)‖`, the default difference step.
pub fn default_fd_step(m: &LindbladModel, t: f64) -> Result<f64> {
    let norm = m.at(t)?.superoperator().norm();
    Ok(if norm > 0.0 { 1e-4 / norm } else { 1e-4 })
}

/// `(D(ρ_t‖π_t) − D(ρ_{t+h}‖π_t))/h` with `ρ_{t+h}` from one RK4 step at the
/// frozen protocol value `λ_t`.
pub fn fd_relative_entropy_rate(
    m: &LindbladModel,
    t: f64,
    rho: &DensityMatrix,
    ssi: &SteadyStateInfo,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let at = m.at(t)?;
    let next = hermitian_part(&at.rk4_step(rho.matrix(), h));
    let pi = ssi.pi.eigen();
    Ok((relative_entropy_to(rho.matrix(), &pi) - relative_entropy_to(&next, &pi)) / h)
}

/// `|Tr[ρ_t (ln ρ_{t+h} − ln ρ_{t−h})/(2h)]|`, which vanishes as `h → 0`.
pub fn vn_derivative_residual<F>(rho_fn: F, t: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<DensityMatrix>,
{
    let log_at = |s: f64| -> Result<CMat> { checked_log(&rho_fn(s)?) };
    let forward = log_at(t + h)?;
    let backward = log_at(t - h)?;
    let rho = rho_fn(t)?;
    let eig = hermitian_eig(rho.matrix())?;
    if !(eig.min() > LOG_FLOOR) {
        return Err(Error::SingularState {
            min_eigenvalue: eig.min(),
        });
    }
    let derivative = (forward - backward) / crate::linalg::c(2.0 * h, 0.0);
    Ok(trace_product_re(rho.matrix(), &derivative).abs())
}
