//! Classical decomposition of `ΔD = D(ℰ(ρ)‖π) − D(ρ‖π)`.
//!
//! With `ρ = Σ_m P_m|p_m⟩⟨p_m|` and `ℰ(ρ) = Σ_α P′_α|e_α⟩⟨e_α|`, the numbers
//! `w^k_{αm} = |⟨e_α|M_k|p_m⟩|²` form a stochastic matrix `W = Σ_k w^k`
//! with `P′ = WP`, and under `πM_kπ⁻¹ = μ_kM_k`
//! `ΔD = Σ_{kαm} w^k_{αm} P_m ln(P′_α/(μ_kP_m))`.

use serde::Serialize;

use super::{apply_map, dual_cptp_check, invariant_state_with_gap, DualCheck, KrausMap, PrivilegedKrausInfo};
use crate::entropy::relative_entropy;
use crate::error::{Error, Result};
use crate::linalg::{c, eig_of_hermitian_part, CMat, DensityMatrix, LOG_FLOOR};
use crate::model::kernel_of;

/// Incoming weight into a vanishing output eigenvalue above this is a
/// support anomaly.
pub const SUPPORT_WEIGHT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalDecomposition {
    /// Eigenvalues of `ρ`, descending.
    pub p: Vec<f64>,
    /// Eigenvalues of `ℰ(ρ)`, descending.
    pub p_prime: Vec<f64>,
    /// `w[k][α][m]`.
    pub w: Vec<Vec<Vec<f64>>>,
    /// `W[α][m] = Σ_k w[k][α][m]`.
    pub big_w: Vec<Vec<f64>>,
    /// `S(ρ) − S(ℰ(ρ))` in the form `Σ w P_m ln(P′_α/P_m)`.
    pub d_s: f64,
    /// `−Σ w P_m ln μ_k`.
    pub d_ex: f64,
    pub delta_d: f64,
    /// `Σ w P_m (P′_α/(μ_kP_m) − 1)`, the convexity upper bound on `ΔD`.
    pub convexity_bound: f64,
    /// `max_m |Σ_α W_{αm} − 1|`.
    pub stochastic_residual: f64,
    /// `max_α |P′_α − Σ_m W_{αm}P_m|`.
    pub push_forward_residual: f64,
    /// Output indices `α` with `P′_α ≈ 0` but nonzero incoming weight.
    pub support_anomalies: Vec<usize>,
}

fn descending(rho: &CMat) -> (Vec<f64>, CMat) {
    let eig = eig_of_hermitian_part(rho);
    let n = eig.dim();
    let values = eig.values.iter().rev().copied().collect();
    let vectors = CMat::from_fn(n, n, |i, j| eig.vectors[(i, n - 1 - j)]);
    (values, vectors)
}

pub fn classical_decomposition(e: &KrausMap, info: &PrivilegedKrausInfo, rho: &DensityMatrix) -> Result<ClassicalDecomposition> {
    let out = apply_map(e, rho)?;
    let (p, p_basis) = descending(rho.matrix());
    let (p_prime, e_basis) = descending(out.matrix());
    classical_decomposition_in_bases(e, info, &p, &p_basis, &p_prime, &e_basis)
}

/// Decomposition with explicitly supplied eigenbases (columns of
/// `p_basis` and `e_basis`), for use when spectra are degenerate.
pub fn classical_decomposition_in_bases(
    e: &KrausMap,
    info: &PrivilegedKrausInfo,
    p: &[f64],
    p_basis: &CMat,
    p_prime: &[f64],
    e_basis: &CMat,
) -> Result<ClassicalDecomposition> {
    let d = e.dim();
    if p.len() != d || p_prime.len() != d || p_basis.nrows() != d || e_basis.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.len(),
        });
    }
    if info.mu.len() != e.kraus().len() {
        return Err(Error::DimensionMismatch {
            expected: e.kraus().len(),
            found: info.mu.len(),
        });
    }
    let w: Vec<Vec<Vec<f64>>> = e
        .kraus()
        .iter()
        .map(|m| {
            let a = e_basis.adjoint() * m * p_basis;
            (0..d).map(|alpha| (0..d).map(|mm| a[(alpha, mm)].norm_sqr()).collect()).collect()
        })
        .collect();
    let big_w: Vec<Vec<f64>> = (0..d)
        .map(|alpha| (0..d).map(|mm| w.iter().map(|wk| wk[alpha][mm]).sum()).collect())
        .collect();

    let mut d_s = 0.0;
    let mut d_ex = 0.0;
    let mut delta_d = 0.0;
    let mut convexity_bound = 0.0;
    for (k, wk) in w.iter().enumerate() {
        let ln_mu = info.mu[k].ln();
        for alpha in 0..d {
            if p_prime[alpha] <= LOG_FLOOR {
                continue;
            }
            for mm in 0..d {
                if p[mm] <= LOG_FLOOR {
                    continue;
                }
                let x = wk[alpha][mm] * p[mm];
                if x == 0.0 {
                    continue;
                }
                let ratio = p_prime[alpha] / p[mm];
                d_s += x * ratio.ln();
                d_ex -= x * ln_mu;
                delta_d += x * (ratio / info.mu[k]).ln();
                convexity_bound += x * (ratio / info.mu[k] - 1.0);
            }
        }
    }

    let stochastic_residual = (0..d)
        .map(|mm| ((0..d).map(|alpha| big_w[alpha][mm]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let push_forward_residual = (0..d)
        .map(|alpha| (p_prime[alpha] - (0..d).map(|mm| big_w[alpha][mm] * p[mm]).sum::<f64>()).abs())
        .fold(0.0, f64::max);
    let support_anomalies = (0..d)
        .filter(|&alpha| {
            p_prime[alpha] <= LOG_FLOOR && (0..d).map(|mm| big_w[alpha][mm] * p[mm]).sum::<f64>() > SUPPORT_WEIGHT_TOL
        })
        .collect();

    Ok(ClassicalDecomposition {
        p: p.to_vec(),
        p_prime: p_prime.to_vec(),
        w,
        big_w,
        d_s,
        d_ex,
        delta_d,
        convexity_bound,
        stochastic_residual,
        push_forward_residual,
        support_anomalies,
    })
}

/// `(D(ℰ(ρ)‖π) − D(ρ‖π), classical ΔD)`.
pub fn delta_d_pair(e: &KrausMap, info: &PrivilegedKrausInfo, rho: &DensityMatrix) -> Result<(f64, f64)> {
    let out = apply_map(e, rho)?;
    let operator = relative_entropy(&out, &info.pi) - relative_entropy(rho, &info.pi);
    let classical = classical_decomposition(e, info, rho)?.delta_d;
    Ok((operator, classical))
}

/// `max |λ − 1|` over the eigenvalues `λ` of `Σ_k (1/μ_k) M_kM_k†`.
///
/// The diagonal of this operator in any orthonormal basis `{|e_α⟩}` is
/// `Σ_{k,m} w^k_{αm}/μ_k`, so the bound covers every choice of output basis.
pub fn mu_normalization_check(e: &KrausMap, info: &PrivilegedKrausInfo) -> Result<f64> {
    if info.mu.len() != e.kraus().len() {
        return Err(Error::DimensionMismatch {
            expected: e.kraus().len(),
            found: info.mu.len(),
        });
    }
    let d = e.dim();
    let sum = e
        .kraus()
        .iter()
        .zip(&info.mu)
        .fold(CMat::zeros(d, d), |acc, (m, mu)| acc + m * m.adjoint() * c(1.0 / mu, 0.0));
    Ok(eig_of_hermitian_part(&sum)
        .values
        .iter()
        .map(|x| (x - 1.0).abs())
        .fold(0.0, f64::max))
}

/// Per-map audit over a set of input states.
#[derive(Debug, Clone, Serialize)]
pub struct KrausAudit {
    pub dim: usize,
    pub n_kraus: usize,
    pub tp_residual: f64,
    /// Second-smallest singular value of `S − I`.
    pub fixed_point_gap: f64,
    pub invariance_residual: Option<f64>,
    pub dual: Option<DualCheck>,
    pub mu: Option<Vec<f64>>,
    pub mu_normalization_residual: Option<f64>,
    /// Largest `D(ℰ(ρ)‖π) − D(ρ‖π)` over the inputs; positive means violation.
    pub max_delta_d: Option<f64>,
    pub max_operator_classical_gap: Option<f64>,
    pub max_stochastic_residual: Option<f64>,
    pub max_push_forward_residual: Option<f64>,
    pub support_anomalies: usize,
    /// Reasons parts of the audit could not run.
    pub errors: Vec<String>,
}

impl KrausAudit {
    /// Monotonicity, classical agreement and normalization all within `tol`.
    pub fn passed(&self, tol: f64) -> bool {
        self.errors.is_empty()
            && self.dual.is_some_and(|d| d.is_cptp)
            && self.max_delta_d.is_some_and(|x| x <= tol)
            && self.max_operator_classical_gap.is_some_and(|x| x <= tol)
            && self.mu_normalization_residual.is_some_and(|x| x <= tol)
    }
}

/// Audits `e` against `pi` (solved for when absent) on the given inputs.
pub fn audit_map(e: &KrausMap, pi: Option<DensityMatrix>, ratio_tol: f64, states: &[DensityMatrix]) -> KrausAudit {
    let d = e.dim();
    let shifted = e.superoperator().into_matrix() - CMat::identity(d * d, d * d);
    let fixed_point_gap = kernel_of(&shifted, d).map_or(0.0, |k| k.gap);
    let mut audit = KrausAudit {
        dim: d,
        n_kraus: e.kraus().len(),
        tp_residual: e.tp_residual(),
        fixed_point_gap,
        invariance_residual: None,
        dual: None,
        mu: None,
        mu_normalization_residual: None,
        max_delta_d: None,
        max_operator_classical_gap: None,
        max_stochastic_residual: None,
        max_push_forward_residual: None,
        support_anomalies: 0,
        errors: Vec::new(),
    };
    let pi = match pi {
        Some(p) => p,
        None => match invariant_state_with_gap(e) {
            Ok((p, _)) => p,
            Err(err) => {
                audit.errors.push(format!("invariant state: {err}"));
                return audit;
            }
        },
    };
    match dual_cptp_check(e, &pi) {
        Ok(check) => audit.dual = Some(check),
        Err(err) => audit.errors.push(format!("dual map: {err}")),
    }
    let mut max_delta: f64 = f64::NEG_INFINITY;
    for rho in states {
        match apply_map(e, rho) {
            Ok(out) => max_delta = max_delta.max(relative_entropy(&out, &pi) - relative_entropy(rho, &pi)),
            Err(err) => audit.errors.push(format!("apply: {err}")),
        }
    }
    if !states.is_empty() {
        audit.max_delta_d = Some(max_delta);
    }
    let info = match PrivilegedKrausInfo::new(e, pi, ratio_tol) {
        Ok(info) => info,
        Err(err) => {
            audit.errors.push(format!("privileged form: {err}"));
            return audit;
        }
    };
    audit.invariance_residual = Some(info.invariance_residual);
    audit.mu = Some(info.mu.clone());
    audit.mu_normalization_residual = mu_normalization_check(e, &info).ok();
    let mut gap: f64 = 0.0;
    let mut stochastic: f64 = 0.0;
    let mut push: f64 = 0.0;
    for rho in states {
        let out = match apply_map(e, rho) {
            Ok(o) => o,
            Err(_) => continue,
        };
        match classical_decomposition(e, &info, rho) {
            Ok(dec) => {
                let operator = relative_entropy(&out, &info.pi) - relative_entropy(rho, &info.pi);
                gap = gap.max((operator - dec.delta_d).abs() / (1.0 + operator.abs()));
                stochastic = stochastic.max(dec.stochastic_residual);
                push = push.max(dec.push_forward_residual);
                audit.support_anomalies += dec.support_anomalies.len();
            }
            Err(err) => audit.errors.push(format!("classical decomposition: {err}")),
        }
    }
    if !states.is_empty() {
        audit.max_operator_classical_gap = Some(gap);
        audit.max_stochastic_residual = Some(stochastic);
        audit.max_push_forward_residual = Some(push);
    }
    audit
}
