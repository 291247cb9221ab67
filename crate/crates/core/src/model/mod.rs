//! Driven Lindblad models `ρ̇ = −i[H(λ_t), ρ] + Σ_k D[L_k(λ_t)]ρ`.
//!
//! The Hamiltonian is affine in the protocol channels and every jump operator
//! is a fixed matrix times a nonnegative amplitude (a constant or a channel).

mod fixtures;
mod propagate;
mod protocol;
mod steady;

pub use fixtures::{
    generate_consistent_model, qubit_model, sigma_minus, sigma_plus, sigma_x, sigma_z,
};
pub use propagate::{propagate, rk4_step, step_grid};
pub(crate) use propagate::certify as certify_state;
pub use protocol::{Channel, Protocol};
pub use steady::{kernel_of, steady_state, KernelSolution, SteadyStateInfo, GAP_FLOOR, PD_FLOOR, WEIGHT_TOL};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, frob, hermiticity_residual, identity, CMat, SuperOperator, C64, I};

/// Scaling of a jump operator along the protocol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Amplitude {
    Constant(f64),
    Channel(String),
}

/// One jump operator `L_k(λ) = c_k(λ)·base`, its reverse partner and the
/// entropy flow `Δs_k` into the environment per jump (k_B = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSpec {
    pub label: String,
    pub base: CMat,
    pub amplitude: Amplitude,
    pub pair: Option<usize>,
    pub entropy_flow: f64,
}

impl JumpSpec {
    pub fn new(label: impl Into<String>, base: CMat, amplitude: Amplitude) -> Self {
        Self {
            label: label.into(),
            base,
            amplitude,
            pair: None,
            entropy_flow: 0.0,
        }
    }

    pub fn paired(mut self, pair: usize, entropy_flow: f64) -> Self {
        self.pair = Some(pair);
        self.entropy_flow = entropy_flow;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerm {
    pub channel: String,
    pub matrix: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    dim: usize,
    h_base: CMat,
    h_terms: Vec<HamiltonianTerm>,
    jumps: Vec<JumpSpec>,
    protocol: Protocol,
    time_reversal_check: bool,
}

impl LindbladModel {
    pub fn new(
        h_base: CMat,
        h_terms: Vec<HamiltonianTerm>,
        jumps: Vec<JumpSpec>,
        protocol: Protocol,
    ) -> Result<Self> {
        let dim = h_base.nrows();
        if dim == 0 {
            return Err(Error::InvalidModel("zero-dimensional model".into()));
        }
        let check_dim = |what: &str, m: &CMat| {
            if m.nrows() != dim || m.ncols() != dim {
                Err(Error::InvalidModel(format!(
                    "{what} is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )))
            } else {
                Ok(())
            }
        };
        let check_herm = |what: &str, m: &CMat| {
            let r = hermiticity_residual(m);
            if r > 1e-10 * frob(m).max(1.0) {
                Err(Error::InvalidModel(format!("{what} is not Hermitian (residual {r:.3e})")))
            } else {
                Ok(())
            }
        };
        check_dim("base Hamiltonian", &h_base)?;
        check_herm("base Hamiltonian", &h_base)?;
        for term in &h_terms {
            let what = format!("Hamiltonian term on `{}`", term.channel);
            check_dim(&what, &term.matrix)?;
            check_herm(&what, &term.matrix)?;
            if protocol.channel(&term.channel).is_none() {
                return Err(Error::InvalidModel(format!("unknown channel `{}`", term.channel)));
            }
        }
        for (k, jump) in jumps.iter().enumerate() {
            check_dim(&format!("jump `{}`", jump.label), &jump.base)?;
            match &jump.amplitude {
                Amplitude::Constant(a) if !(*a >= 0.0 && a.is_finite()) => {
                    return Err(Error::InvalidModel(format!(
                        "jump `{}` has invalid amplitude {a}",
                        jump.label
                    )));
                }
                Amplitude::Channel(name) => match protocol.channel(name) {
                    None => {
                        return Err(Error::InvalidModel(format!("unknown channel `{name}`")));
                    }
                    Some(ch) if ch.min_value() < 0.0 => {
                        return Err(Error::InvalidModel(format!(
                            "amplitude channel `{name}` takes negative values"
                        )));
                    }
                    _ => {}
                },
                _ => {}
            }
            if let Some(p) = jump.pair {
                if p >= jumps.len() || jumps[p].pair != Some(k) {
                    return Err(Error::InvalidModel(format!(
                        "pairing of jump `{}` is not an involution",
                        jump.label
                    )));
                }
                if p == k && jump.entropy_flow != 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "self-paired jump `{}` must carry zero entropy flow",
                        jump.label
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            h_base,
            h_terms,
            jumps,
            protocol,
            time_reversal_check: true,
        })
    }

    pub fn with_time_reversal_check(mut self, enabled: bool) -> Self {
        self.time_reversal_check = enabled;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h_base(&self) -> &CMat {
        &self.h_base
    }

    pub fn h_terms(&self) -> &[HamiltonianTerm] {
        &self.h_terms
    }

    pub fn jumps(&self) -> &[JumpSpec] {
        &self.jumps
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn time_reversal_check(&self) -> bool {
        self.time_reversal_check
    }

    /// Replaces the protocol; channel references are re-validated.
    pub fn with_protocol(self, protocol: Protocol) -> Result<Self> {
        let trc = self.time_reversal_check;
        Self::new(self.h_base, self.h_terms, self.jumps, protocol)
            .map(|m| m.with_time_reversal_check(trc))
    }

    /// Adds `channel(t)·matrix` to the Hamiltonian.
    pub fn with_hamiltonian_term(mut self, channel: Channel, matrix: CMat) -> Result<Self> {
        let name = channel.name().to_string();
        self.protocol.push_channel(channel)?;
        self.h_terms.push(HamiltonianTerm { channel: name, matrix });
        let trc = self.time_reversal_check;
        Self::new(self.h_base, self.h_terms, self.jumps, self.protocol)
            .map(|m| m.with_time_reversal_check(trc))
    }

    /// Model operators frozen at protocol time `t`.
    pub fn at(&self, t: f64) -> Result<ModelAt> {
        self.protocol.check(t)?;
        let mut h = self.h_base.clone();
        for term in &self.h_terms {
            let lambda = self.protocol.value(&term.channel, t)?;
            h += &term.matrix * c(lambda, 0.0);
        }
        let jumps = self
            .jumps
            .iter()
            .map(|j| {
                let a = match &j.amplitude {
                    Amplitude::Constant(a) => *a,
                    Amplitude::Channel(name) => self.protocol.value(name, t)?,
                };
                Ok(&j.base * c(a, 0.0))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelAt::new(t, h, jumps))
    }
}

/// Hamiltonian and jump operators at one protocol time.
#[derive(Debug, Clone)]
pub struct ModelAt {
    pub t: f64,
    pub hamiltonian: CMat,
    pub jumps: Vec<CMat>,
    jump_products: Vec<CMat>,
    decay: CMat,
}

impl ModelAt {
    pub fn new(t: f64, hamiltonian: CMat, jumps: Vec<CMat>) -> Self {
        let dim = hamiltonian.nrows();
        let jump_products: Vec<CMat> = jumps.iter().map(|l| l.adjoint() * l).collect();
        let mut decay = CMat::zeros(dim, dim);
        for p in &jump_products {
            decay += p;
        }
        Self {
            t,
            hamiltonian,
            jumps,
            jump_products,
            decay,
        }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// `L_k† L_k`.
    pub fn jump_product(&self, k: usize) -> &CMat {
        &self.jump_products[k]
    }

    /// `Σ_k L_k† L_k`.
    pub fn decay_operator(&self) -> &CMat {
        &self.decay
    }

    /// `ℋ = H − (i/2) Σ_k L_k† L_k`.
    pub fn effective_hamiltonian(&self) -> CMat {
        &self.hamiltonian - &self.decay * c(0.0, 0.5)
    }

    /// `Tr[L_k† L_k ρ]`.
    pub fn jump_rate(&self, k: usize, rho: &CMat) -> f64 {
        crate::linalg::trace_product_re(&self.jump_products[k], rho)
    }

    /// `ℒρ = −i[H, ρ] + Σ_k (L_k ρ L_k† − ½{L_k† L_k, ρ})`.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let h_rho = &self.hamiltonian * rho;
        let rho_h = rho * &self.hamiltonian;
        let k_rho = &self.decay * rho;
        let rho_k = rho * &self.decay;
        let mut out = (h_rho - rho_h) * (-I) - (k_rho + rho_k) * c(0.5, 0.0);
        for l in &self.jumps {
            out += l * rho * l.adjoint();
        }
        out
    }

    pub fn superoperator(&self) -> SuperOperator {
        let d = self.dim();
        let id = identity(d);
        let lr = |a: &CMat, b: &CMat| SuperOperator::left_right(a, b).expect("square operands");
        let mut s = SuperOperator::zeros(d);
        s.add_scaled(&lr(&self.hamiltonian, &id), -I);
        s.add_scaled(&lr(&id, &self.hamiltonian), I);
        s.add_scaled(&lr(&self.decay, &id), c(-0.5, 0.0));
        s.add_scaled(&lr(&id, &self.decay), c(-0.5, 0.0));
        for l in &self.jumps {
            s.add_scaled(&lr(l, &l.adjoint()), C64::new(1.0, 0.0));
        }
        s
    }

    /// One classical fourth-order step with the generator frozen at this time.
    pub fn rk4_step(&self, rho: &CMat, h: f64) -> CMat {
        let half = c(0.5 * h, 0.0);
        let k1 = self.apply(rho);
        let k2 = self.apply(&(rho + &k1 * half));
        let k3 = self.apply(&(rho + &k2 * half));
        let k4 = self.apply(&(rho + &k3 * c(h, 0.0)));
        rho + (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0)
    }
}

pub fn evaluate_model(m: &LindbladModel, t: f64) -> Result<(CMat, Vec<CMat>)> {
    let at = m.at(t)?;
    Ok((at.hamiltonian, at.jumps))
}

pub fn liouvillian_apply(m: &LindbladModel, t: f64, rho: &CMat) -> Result<CMat> {
    Ok(m.at(t)?.apply(rho))
}

pub fn liouvillian_matrix(m: &LindbladModel, t: f64) -> Result<SuperOperator> {
    Ok(m.at(t)?.superoperator())
}
