//! Certification of thermodynamic consistency for a Lindblad model at one
//! protocol time: privileged representation `πLπ⁻¹ = ϖL` with
//! `[H, π] = [Σ L†L, π] = 0`, local detailed balance, time-reversal symmetry,
//! commutation with the modular operator `ρ ↦ πρπ⁻¹` and the logarithm
//! intertwining identity `ln(π)L = L ln(ϖπ)`.
//!
//! Checks never fail on physics: they return report fragments carrying
//! residuals and verdicts. Only malformed input is an error.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::linalg::{
    commutator, frob, inverse_pd, matrix_log_pd, max_abs, CMat, DensityMatrix, SuperOperator,
    LOG_FLOOR,
};
use crate::model::{LindbladModel, SteadyStateInfo};

/// Entries of `L` below this fraction of its largest entry are ignored when
/// forming ratios.
pub const ENTRY_CUTOFF: f64 = 1e-10;

/// Tolerances for [`audit`]. All are relative except where noted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Ratio spread and `‖πLπ⁻¹ − ϖL‖/‖L‖`; absolute for the commutators.
    pub privileged: f64,
    pub detailed_balance: f64,
    /// Absolute bound on imaginary parts of jump entries.
    pub time_reversal: f64,
    pub modular: f64,
    /// Absolute bound on `‖ln(π)L − L ln(ϖπ)‖_F`.
    pub log_identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            privileged: 1e-9,
            detailed_balance: 1e-9,
            time_reversal: 1e-12,
            modular: 1e-9,
            log_identity: 1e-10,
        }
    }
}

/// Extracts `ϖ` with `πLπ⁻¹ = ϖL` as the mean of the entrywise ratios
/// `(πLπ⁻¹)_ij / L_ij` over the non-negligible entries of `L`.
pub fn extract_rep_weights(pi: &DensityMatrix, l: &CMat, tol: f64) -> Result<f64> {
    let pi_inv = pi_inverse(pi)?;
    weight_from_ratios(pi.matrix(), &pi_inv, l, tol)
}

fn pi_inverse(pi: &DensityMatrix) -> Result<CMat> {
    inverse_pd(pi.matrix(), LOG_FLOOR).map_err(|_| Error::NotPositiveDefinite {
        min_eigenvalue: pi.min_eigenvalue(),
    })
}

pub(crate) fn weight_from_ratios(pi: &CMat, pi_inv: &CMat, l: &CMat, tol: f64) -> Result<f64> {
    let largest = max_abs(l);
    if largest == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let conjugated = pi * l * pi_inv;
    let cutoff = ENTRY_CUTOFF * largest;
    let ratios: Vec<_> = l
        .iter()
        .zip(conjugated.iter())
        .filter(|(x, _)| x.norm() > cutoff)
        .map(|(x, y)| y / x)
        .collect();
    let mean = ratios.iter().sum::<num_complex::Complex64>() / ratios.len() as f64;
    let scale = mean.norm();
    let spread = ratios
        .iter()
        .map(|r| (r - mean).norm() / scale)
        .fold(0.0_f64, f64::max)
        .max(mean.im.abs() / scale);
    if !(spread <= tol) || !(mean.re > 0.0) {
        return Err(Error::NotPrivileged { spread });
    }
    Ok(mean.re)
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpPrivilege {
    pub weight: Option<f64>,
    /// `‖πLπ⁻¹ − ϖL‖_F / ‖L‖_F`, with the least-squares `ϖ` when extraction failed.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrivilegedCheck {
    pub pass: bool,
    pub jumps: Vec<JumpPrivilege>,
    pub max_residual: f64,
    /// `‖[H, π]‖_F`.
    pub hamiltonian_commutator: f64,
    /// `‖[Σ_k L_k†L_k, π]‖_F`.
    pub decay_commutator: f64,
    /// `max |ϖ_k ϖ_k̃ − 1|` over paired jumps with extracted weights.
    pub reciprocity_residual: f64,
}

impl PrivilegedCheck {
    pub fn weights(&self) -> Vec<Option<f64>> {
        self.jumps.iter().map(|j| j.weight).collect()
    }
}

pub fn check_privileged(
    m: &LindbladModel,
    t: f64,
    ssi: &SteadyStateInfo,
    tol: f64,
) -> Result<PrivilegedCheck> {
    let at = m.at(t)?;
    let pi = ssi.pi.matrix();
    let pi_inv = pi_inverse(&ssi.pi)?;
    let mut jumps = Vec::with_capacity(at.jumps.len());
    let mut all_extracted = true;
    for l in &at.jumps {
        let norm = frob(l);
        if norm == 0.0 {
            jumps.push(JumpPrivilege {
                weight: None,
                residual: 0.0,
            });
            continue;
        }
        let conjugated = pi * l * &pi_inv;
        let weight = weight_from_ratios(pi, &pi_inv, l, tol).ok();
        let w = weight.unwrap_or_else(|| {
            all_extracted = false;
            l.dotc(&conjugated).re / (norm * norm)
        });
        let residual = frob(&(conjugated - l * crate::linalg::c(w, 0.0))) / norm;
        jumps.push(JumpPrivilege { weight, residual });
    }
    let max_residual = jumps.iter().map(|j| j.residual).fold(0.0, f64::max);
    let hamiltonian_commutator = frob(&commutator(&at.hamiltonian, pi));
    let decay_commutator = frob(&commutator(at.decay_operator(), pi));
    let mut reciprocity_residual: f64 = 0.0;
    for (k, spec) in m.jumps().iter().enumerate() {
        if let (Some(p), Some(a)) = (spec.pair, jumps[k].weight) {
            if let Some(b) = jumps[p].weight {
                reciprocity_residual = reciprocity_residual.max((a * b - 1.0).abs());
            }
        }
    }
    let pass = all_extracted
        && max_residual <= tol
        && hamiltonian_commutator <= tol
        && decay_commutator <= tol;
    Ok(PrivilegedCheck {
        pass,
        jumps,
        max_residual,
        hamiltonian_commutator,
        decay_commutator,
        reciprocity_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairResidual {
    pub jump: usize,
    pub partner: usize,
    /// `‖L_k − L_k̃† e^{Δs_k/2}‖_F`.
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetailedBalanceCheck {
    pub pass: bool,
    pub pairs: Vec<PairResidual>,
    pub max_relative_residual: f64,
}

/// Verifies `L_k = L_k̃† e^{Δs_k/2}` for every jump.
pub fn check_local_detailed_balance(m: &LindbladModel, t: f64, tol: f64) -> Result<DetailedBalanceCheck> {
    if let Some(index) = m.jumps().iter().position(|j| j.pair.is_none()) {
        return Err(Error::UnpairedJump { index });
    }
    let at = m.at(t)?;
    let mut pairs = Vec::with_capacity(at.jumps.len());
    let mut max_relative_residual: f64 = 0.0;
    for (k, spec) in m.jumps().iter().enumerate() {
        let partner = spec.pair.expect("checked above");
        let l = &at.jumps[k];
        let reversed = at.jumps[partner].adjoint() * crate::linalg::c((spec.entropy_flow / 2.0).exp(), 0.0);
        let residual = frob(&(l - reversed));
        let scale = frob(l);
        let relative = if scale > 0.0 { residual / scale } else { residual };
        max_relative_residual = max_relative_residual.max(relative);
        pairs.push(PairResidual {
            jump: k,
            partner,
            residual,
            pass: relative <= tol,
        });
    }
    Ok(DetailedBalanceCheck {
        pass: pairs.iter().all(|p| p.pass),
        pairs,
        max_relative_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeReversalCheck {
    pub status: CheckStatus,
    /// Largest imaginary part among jump-operator entries.
    pub max_imaginary: f64,
}

/// With time reversal taken as complex conjugation in the computational
/// basis, `ΘLΘ = L` holds iff every entry of `L` is real.
pub fn check_time_reversal(m: &LindbladModel, t: f64, tol: f64) -> Result<TimeReversalCheck> {
    if !m.time_reversal_check() {
        return Ok(TimeReversalCheck {
            status: CheckStatus::Skipped,
            max_imaginary: 0.0,
        });
    }
    let at = m.at(t)?;
    let max_imaginary = at
        .jumps
        .iter()
        .flat_map(|l| l.iter().map(|z| z.im.abs()))
        .fold(0.0, f64::max);
    let status = if max_imaginary <= tol { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok(TimeReversalCheck { status, max_imaginary })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModularCheck {
    pub pass: bool,
    /// `‖ℒσ − σℒ‖_F / (‖ℒ‖_F ‖σ‖_F)` with `σ(ρ) = πρπ⁻¹`.
    pub commutator: f64,
}

pub fn check_modular_commutation(
    m: &LindbladModel,
    t: f64,
    ssi: &SteadyStateInfo,
    tol: f64,
) -> Result<ModularCheck> {
    let generator = m.at(t)?.superoperator();
    let pi_inv = pi_inverse(&ssi.pi)?;
    let modular = SuperOperator::left_right(ssi.pi.matrix(), &pi_inv)?;
    let scale = generator.norm() * modular.norm();
    let commutator = if scale == 0.0 {
        0.0
    } else {
        let diff = generator.compose(&modular).into_matrix() - modular.compose(&generator).into_matrix();
        frob(&diff) / scale
    };
    Ok(ModularCheck {
        pass: commutator <= tol,
        commutator,
    })
}

/// `‖ln(π)L − L ln(ϖπ)‖_F`.
pub fn verify_log_intertwining(pi: &DensityMatrix, l: &CMat, weight: f64) -> Result<f64> {
    if !(weight > 0.0) {
        return Err(Error::InvalidArgument(format!("weight must be positive, got {weight}")));
    }
    let log_pi = matrix_log_pd(pi.matrix(), LOG_FLOOR)?;
    let scaled = pi.matrix() * crate::linalg::c(weight, 0.0);
    let log_scaled = matrix_log_pd(&scaled, LOG_FLOOR)?;
    Ok(frob(&(log_pi * l - l * log_scaled)))
}

#[derive(Debug, Clone, Serialize)]
pub struct LogIdentityCheck {
    pub pass: bool,
    pub max_residual: f64,
}

/// All consistency checks at one protocol time.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub t: f64,
    pub privileged: PrivilegedCheck,
    /// `Err` carries the reason the check could not run (unpaired jumps).
    pub detailed_balance: std::result::Result<DetailedBalanceCheck, String>,
    pub time_reversal: TimeReversalCheck,
    pub modular: ModularCheck,
    pub log_identity: LogIdentityCheck,
    /// `Δs_k − ln ϖ_k` per jump where both exist. Reported, not asserted.
    pub entropy_flow_minus_log_weight: Vec<Option<f64>>,
}

pub fn audit(m: &LindbladModel, t: f64, ssi: &SteadyStateInfo, tol: &Tolerances) -> Result<ConsistencyReport> {
    let privileged = check_privileged(m, t, ssi, tol.privileged)?;
    let detailed_balance = match check_local_detailed_balance(m, t, tol.detailed_balance) {
        Ok(c) => Ok(c),
        Err(e @ Error::UnpairedJump { .. }) => Err(e.to_string()),
        Err(e) => return Err(e),
    };
    let time_reversal = check_time_reversal(m, t, tol.time_reversal)?;
    let modular = check_modular_commutation(m, t, ssi, tol.modular)?;
    let at = m.at(t)?;
    let mut max_residual: f64 = 0.0;
    let mut all_weights = true;
    for (l, j) in at.jumps.iter().zip(&privileged.jumps) {
        if frob(l) == 0.0 {
            continue;
        }
        match j.weight {
            Some(w) => max_residual = max_residual.max(verify_log_intertwining(&ssi.pi, l, w)?),
            None => all_weights = false,
        }
    }
    let log_identity = LogIdentityCheck {
        pass: all_weights && max_residual <= tol.log_identity,
        max_residual,
    };
    let entropy_flow_minus_log_weight = m
        .jumps()
        .iter()
        .zip(&privileged.jumps)
        .map(|(spec, j)| j.weight.map(|w| spec.entropy_flow - w.ln()))
        .collect();
    Ok(ConsistencyReport {
        t,
        privileged,
        detailed_balance,
        time_reversal,
        modular,
        log_identity,
        entropy_flow_minus_log_weight,
    })
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// Human-readable names of the failing checks.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let p = &self.privileged;
        if !p.pass {
            let missing: Vec<String> = p
                .jumps
                .iter()
                .enumerate()
                .filter(|(_, j)| j.weight.is_none() && j.residual > 0.0)
                .map(|(k, _)| k.to_string())
                .collect();
            let mut msg = format!(
                "privileged: max residual {:.3e}, [H, pi] {:.3e}, [sum L^dag L, pi] {:.3e}",
                p.max_residual, p.hamiltonian_commutator, p.decay_commutator
            );
            if !missing.is_empty() {
                msg.push_str(&format!(", no weight for jumps {}", missing.join(",")));
            }
            out.push(msg);
        }
        match &self.detailed_balance {
            Ok(db) => {
                for pair in db.pairs.iter().filter(|p| !p.pass) {
                    out.push(format!(
                        "detailed_balance: jump {} vs partner {} residual {:.3e}",
                        pair.jump, pair.partner, pair.residual
                    ));
                }
            }
            Err(reason) => out.push(format!("detailed_balance: {reason}")),
        }
        if self.time_reversal.status == CheckStatus::Fail {
            out.push(format!(
                "time_reversal: imaginary jump entries up to {:.3e}",
                self.time_reversal.max_imaginary
            ));
        }
        if !self.modular.pass {
            out.push(format!("modular: commutator {:.3e}", self.modular.commutator));
        }
        if !self.log_identity.pass {
            out.push(format!("log_identity: residual {:.3e}", self.log_identity.max_residual));
        }
        out
    }

    /// Flat JSON object of named residuals and verdicts.
    pub fn to_flat_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let num = |x: f64| serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null);
        m.insert("t".into(), num(self.t));
        m.insert("pass".into(), Value::Bool(self.passed()));
        let p = &self.privileged;
        m.insert("privileged.pass".into(), Value::Bool(p.pass));
        m.insert("privileged.max_residual".into(), num(p.max_residual));
        m.insert("privileged.hamiltonian_commutator".into(), num(p.hamiltonian_commutator));
        m.insert("privileged.decay_commutator".into(), num(p.decay_commutator));
        m.insert("privileged.reciprocity_residual".into(), num(p.reciprocity_residual));
        for (k, j) in p.jumps.iter().enumerate() {
            m.insert(format!("privileged.weight.{k}"), j.weight.map_or(Value::Null, num));
            m.insert(format!("privileged.residual.{k}"), num(j.residual));
        }
        match &self.detailed_balance {
            Ok(db) => {
                m.insert("detailed_balance.pass".into(), Value::Bool(db.pass));
                m.insert("detailed_balance.max_relative_residual".into(), num(db.max_relative_residual));
                for pair in &db.pairs {
                    m.insert(format!("detailed_balance.residual.{}", pair.jump), num(pair.residual));
                }
            }
            Err(reason) => {
                m.insert("detailed_balance.pass".into(), Value::Bool(false));
                m.insert("detailed_balance.error".into(), Value::String(reason.clone()));
            }
        }
        let status = match self.time_reversal.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Skipped => "skipped",
        };
        m.insert("time_reversal.status".into(), Value::String(status.into()));
        m.insert("time_reversal.max_imaginary".into(), num(self.time_reversal.max_imaginary));
        m.insert("modular.pass".into(), Value::Bool(self.modular.pass));
        m.insert("modular.commutator".into(), num(self.modular.commutator));
        m.insert("log_identity.pass".into(), Value::Bool(self.log_identity.pass));
        m.insert("log_identity.max_residual".into(), num(self.log_identity.max_residual));
        for (k, d) in self.entropy_flow_minus_log_weight.iter().enumerate() {
            m.insert(format!("entropy_flow_minus_log_weight.{k}"), d.map_or(Value::Null, num));
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diag, identity};
    use crate::model::{
        generate_consistent_model, qubit_model, sigma_minus, sigma_plus, sigma_x, sigma_z, steady_state,
        Amplitude, JumpSpec, Protocol,
    };

    fn qubit_pi() -> DensityMatrix {
        DensityMatrix::from_diagonal(&[1.0 / 3.0, 2.0 / 3.0]).unwrap()
    }

    #[test]
    fn weights_from_ladder_operators() {
        let w_minus = extract_rep_weights(&qubit_pi(), &sigma_minus(), 1e-9).unwrap();
        let w_plus = extract_rep_weights(&qubit_pi(), &sigma_plus(), 1e-9).unwrap();
        assert!((w_minus - 2.0).abs() < 1e-14);
        assert!((w_plus - 0.5).abs() < 1e-14);
        assert!((w_minus * w_plus - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_x_is_not_privileged() {
        let r = extract_rep_weights(&qubit_pi(), &sigma_x(), 1e-9);
        assert!(matches!(r, Err(Error::NotPrivileged { .. })));
        assert!(matches!(
            extract_rep_weights(&qubit_pi(), &CMat::zeros(2, 2), 1e-9),
            Err(Error::ZeroOperator)
        ));
    }

    #[test]
    fn qubit_is_privileged() {
        let m = qubit_model(1.0, 1.0, 1.0);
        let ssi = steady_state(&m, 0.0).unwrap();
        let check = check_privileged(&m, 0.0, &ssi, 1e-9).unwrap();
        assert!(check.pass);
        let w = check.weights();
        assert!((w[0].unwrap() - 2.0).abs() < 1e-10 && (w[1].unwrap() - 0.5).abs() < 1e-10);
        assert!(check.reciprocity_residual < 1e-8);
    }

    #[test]
    fn non_commuting_hamiltonian_fails() {
        let base = qubit_model(1.0, 1.0, 1.0);
        let m = LindbladModel::new(sigma_x(), vec![], base.jumps().to_vec(), Protocol::unbounded(0.0)).unwrap();
        // Judge against the thermal state of the original qubit.
        let ssi = steady_state(&base, 0.0).unwrap();
        let check = check_privileged(&m, 0.0, &ssi, 1e-9).unwrap();
        assert!(!check.pass);
        let expected = frob(&commutator(&sigma_x(), &diag(&[1.0 / 3.0, 2.0 / 3.0])));
        assert!((check.hamiltonian_commutator - expected).abs() < 1e-12);
        assert!(check.hamiltonian_commutator > 0.1);
    }

    #[test]
    fn generated_models_pass_everything() {
        for seed in 0..8 {
            let (m, ssi) = generate_consistent_model(2 + seed as usize % 4, seed).unwrap();
            let report = audit(&m, 0.0, &ssi, &Tolerances::default()).unwrap();
            assert!(report.passed(), "{:?}", report.failures());
            assert!(report.privileged.max_residual < 1e-9);
            for d in report.entropy_flow_minus_log_weight.iter() {
                assert!(d.unwrap().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn detailed_balance_examples() {
        let m = qubit_model(1.0, 1.0, 1.0);
        let check = check_local_detailed_balance(&m, 0.0, 1e-12).unwrap();
        assert!(check.pass);

        let mut jumps = m.jumps().to_vec();
        jumps[0].entropy_flow = 0.0;
        let bad = LindbladModel::new(m.h_base().clone(), vec![], jumps, Protocol::unbounded(0.0)).unwrap();
        let check = check_local_detailed_balance(&bad, 0.0, 1e-9).unwrap();
        assert!(!check.pass);
        assert!((check.pairs[0].residual - (2f64.sqrt() - 1.0)).abs() < 1e-14);

        let hermitian = vec![JumpSpec::new("x", sigma_x(), Amplitude::Constant(0.7)).paired(0, 0.0)];
        let m = LindbladModel::new(sigma_z(), vec![], hermitian, Protocol::unbounded(0.0)).unwrap();
        assert!(check_local_detailed_balance(&m, 0.0, 1e-12).unwrap().pass);

        let unpaired = vec![JumpSpec::new("x", sigma_minus(), Amplitude::Constant(1.0))];
        let m = LindbladModel::new(sigma_z(), vec![], unpaired, Protocol::unbounded(0.0)).unwrap();
        assert!(matches!(
            check_local_detailed_balance(&m, 0.0, 1e-9),
            Err(Error::UnpairedJump { index: 0 })
        ));
    }

    #[test]
    fn time_reversal_examples() {
        let m = qubit_model(1.0, 1.0, 1.0);
        assert_eq!(check_time_reversal(&m, 0.0, 1e-12).unwrap().status, CheckStatus::Pass);
        let imaginary = vec![JumpSpec::new("x", sigma_minus() * c(0.0, 1.0), Amplitude::Constant(1.0))];
        let m = LindbladModel::new(sigma_z(), vec![], imaginary, Protocol::unbounded(0.0)).unwrap();
        assert_eq!(check_time_reversal(&m, 0.0, 1e-12).unwrap().status, CheckStatus::Fail);
        let m = m.with_time_reversal_check(false);
        assert_eq!(check_time_reversal(&m, 0.0, 1e-12).unwrap().status, CheckStatus::Skipped);
    }

    #[test]
    fn modular_commutation_examples() {
        let m = qubit_model(1.0, 1.0, 1.0);
        let ssi = steady_state(&m, 0.0).unwrap();
        assert!(check_modular_commutation(&m, 0.0, &ssi, 1e-9).unwrap().pass);

        // Ladder jumps plus a symmetric σ_x jump: non-degenerate diagonal π,
        // but σ_x has no privileged weight.
        let mut jumps = m.jumps().to_vec();
        jumps.push(JumpSpec::new("flip", sigma_x(), Amplitude::Constant(0.5)).paired(2, 0.0));
        let mixed = LindbladModel::new(m.h_base().clone(), vec![], jumps, Protocol::unbounded(0.0)).unwrap();
        let ssi = steady_state(&mixed, 0.0).unwrap();
        assert!(!check_privileged(&mixed, 0.0, &ssi, 1e-9).unwrap().pass);
        assert!(!check_modular_commutation(&mixed, 0.0, &ssi, 1e-9).unwrap().pass);

        let zero = LindbladModel::new(CMat::zeros(2, 2), vec![], vec![], Protocol::unbounded(0.0)).unwrap();
        let ssi = SteadyStateInfo {
            pi: qubit_pi(),
            weights: vec![],
            gap: 0.0,
            residual: 0.0,
        };
        let check = check_modular_commutation(&zero, 0.0, &ssi, 1e-9).unwrap();
        assert!(check.pass && check.commutator == 0.0);
    }

    #[test]
    fn log_intertwining_examples() {
        let pi = qubit_pi();
        assert!(verify_log_intertwining(&pi, &identity(2), 1.0).unwrap() < 1e-15);
        assert!(verify_log_intertwining(&pi, &sigma_minus(), 2.0).unwrap() < 1e-14);
        let off = verify_log_intertwining(&pi, &sigma_minus(), 2.1).unwrap();
        let expected = ((2.0f64 / 3.0).ln() - 0.7f64.ln()).abs();
        assert!((off - expected).abs() < 1e-14);
    }

    #[test]
    fn flat_json_has_named_fields() {
        let m = qubit_model(1.0, 1.0, 1.0);
        let ssi = steady_state(&m, 0.0).unwrap();
        let flat = audit(&m, 0.0, &ssi, &Tolerances::default()).unwrap().to_flat_json();
        assert_eq!(flat["pass"], Value::Bool(true));
        assert_eq!(flat["time_reversal.status"], Value::String("pass".into()));
        assert!(flat.values().all(|v| !v.is_object() && !v.is_array()));
    }
}
