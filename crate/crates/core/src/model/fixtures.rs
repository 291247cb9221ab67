//! Reference models: the thermal qubit and randomly generated models that
//! satisfy the privileged-representation and detailed-balance assumptions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::steady::{kernel_of, SteadyStateInfo};
use super::{Amplitude, JumpSpec, LindbladModel, Protocol};
use crate::error::{Error, Result};
use crate::linalg::{c, diag, frob, real_matrix, CMat, DensityMatrix};
use crate::random::{distinct_probabilities, random_orthogonal};

/// `σ₋ = |g⟩⟨e|` in the `(|e⟩, |g⟩)` ordering.
pub fn sigma_minus() -> CMat {
    real_matrix(2, &[0.0, 0.0, 1.0, 0.0])
}

pub fn sigma_plus() -> CMat {
    real_matrix(2, &[0.0, 1.0, 0.0, 0.0])
}

pub fn sigma_z() -> CMat {
    real_matrix(2, &[1.0, 0.0, 0.0, -1.0])
}

pub fn sigma_x() -> CMat {
    real_matrix(2, &[0.0, 1.0, 1.0, 0.0])
}

/// Qubit in a thermal bath: `H = (ω/2)σ_z`, `L₋ = √(γ(n̄+1))σ₋`,
/// `L₊ = √(γn̄)σ₊`, paired with `Δs₋ = ln((n̄+1)/n̄) = −Δs₊`.
pub fn qubit_model(omega: f64, gamma: f64, nbar: f64) -> LindbladModel {
    let h = sigma_z() * c(0.5 * omega, 0.0);
    let flow = ((nbar + 1.0) / nbar).ln();
    let jumps = vec![
        JumpSpec::new("minus", sigma_minus(), Amplitude::Constant((gamma * (nbar + 1.0)).sqrt()))
            .paired(1, flow),
        JumpSpec::new("plus", sigma_plus(), Amplitude::Constant((gamma * nbar).sqrt()))
            .paired(0, -flow),
    ];
    LindbladModel::new(h, vec![], jumps, Protocol::unbounded(0.0)).expect("valid qubit model")
}

/// Random `d`-level model built around a known steady state `π`.
///
/// `π` has distinct eigenvalues in a random real orthonormal basis `{|π_i⟩}`,
/// `H` is diagonal in that basis and every pair `i < j` contributes
/// `L_{i→j} = √γ_ij |π_j⟩⟨π_i|` and its reverse with `γ_ij π_i = γ_ji π_j`.
/// The pair carries `Δs_{i→j} = ln(π_j/π_i)`, which is also `ln ϖ_{i→j}`.
pub fn generate_consistent_model(d: usize, seed: u64) -> Result<(LindbladModel, SteadyStateInfo)> {
    if !(2..=8).contains(&d) {
        return Err(Error::InvalidArgument(format!("dimension {d} outside 2..=8")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = distinct_probabilities(d, 0.3, &mut rng);
    let basis = random_orthogonal(d, &mut rng);
    let rotate = |m: &CMat| &basis * m * basis.adjoint();
    let energies: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h = rotate(&diag(&energies));
    let pi = rotate(&diag(&p));

    let mut jumps = Vec::new();
    let mut weights = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let strength = 0.5 + rng.random::<f64>();
            let up = strength * (p[j] / p[i]).sqrt();
            let down = strength * (p[i] / p[j]).sqrt();
            let transition = |from: usize, to: usize| {
                let mut m = CMat::zeros(d, d);
                m[(to, from)] = c(1.0, 0.0);
                rotate(&m)
            };
            let k = jumps.len();
            let flow = (p[j] / p[i]).ln();
            jumps.push(
                JumpSpec::new(format!("{i}->{j}"), transition(i, j), Amplitude::Constant(up.sqrt()))
                    .paired(k + 1, flow),
            );
            jumps.push(
                JumpSpec::new(format!("{j}->{i}"), transition(j, i), Amplitude::Constant(down.sqrt()))
                    .paired(k, -flow),
            );
            weights.push(Some(p[j] / p[i]));
            weights.push(Some(p[i] / p[j]));
        }
    }
    let model = LindbladModel::new(h, vec![], jumps, Protocol::unbounded(0.0))?;
    let at = model.at(0.0)?;
    let kernel = kernel_of(at.superoperator().matrix(), d)?;
    let residual = frob(&at.apply(&pi));
    let info = SteadyStateInfo {
        pi: DensityMatrix::from_trusted(pi),
        weights,
        gap: kernel.gap,
        residual,
    };
    Ok((model, info))
}
