#![allow(dead_code)]

use nonadiabat::linalg::{c, CMat, DensityMatrix};
use nonadiabat::model::{
    generate_consistent_model, qubit_model, sigma_minus, sigma_plus, sigma_z, Amplitude, Channel, JumpSpec,
    LindbladModel, Protocol, SteadyStateInfo,
};
use nonadiabat::random::random_full_rank_density;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit qubit (ω = γ = n̄ = 1).
pub fn qubit() -> LindbladModel {
    qubit_model(1.0, 1.0, 1.0)
}

/// Qubit whose bath occupation rises from 1 to 2 and whose splitting rises
/// from 1 to 2 over `[0, 1]`.
pub fn qubit_ramp() -> LindbladModel {
    let protocol = Protocol::new(
        0.0,
        1.0,
        vec![
            Channel::ramp("a_minus", (0.0, 2f64.sqrt()), (1.0, 3f64.sqrt())).unwrap(),
            Channel::ramp("a_plus", (0.0, 1.0), (1.0, 2f64.sqrt())).unwrap(),
        ],
    )
    .unwrap();
    let jumps = vec![
        JumpSpec::new("minus", sigma_minus(), Amplitude::Channel("a_minus".into())).paired(1, 2f64.ln()),
        JumpSpec::new("plus", sigma_plus(), Amplitude::Channel("a_plus".into())).paired(0, -(2f64.ln())),
    ];
    LindbladModel::new(sigma_z() * c(0.5, 0.0), vec![], jumps, protocol)
        .unwrap()
        .with_hamiltonian_term(Channel::ramp("omega", (0.0, 0.0), (1.0, 1.0)).unwrap(), sigma_z() * c(0.5, 0.0))
        .unwrap()
}

/// Generated consistent model with every jump amplitude ramped by a random
/// factor over `[0, 1]` and a ramped Hamiltonian term diagonal in the
/// eigenbasis of the initial steady state.
pub fn ramped_generated(d: usize, seed: u64) -> LindbladModel {
    let (m, ssi) = generate_consistent_model(d, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let mut channels = Vec::new();
    let jumps: Vec<JumpSpec> = m
        .jumps()
        .iter()
        .enumerate()
        .map(|(k, j)| {
            let a = match j.amplitude {
                Amplitude::Constant(a) => a,
                Amplitude::Channel(_) => unreachable!("generated models use constant amplitudes"),
            };
            let name = format!("amp{k}");
            let factor = 0.7 + 0.8 * rng.random::<f64>();
            channels.push(Channel::ramp(name.clone(), (0.0, a), (1.0, a * factor)).unwrap());
            let mut spec = j.clone();
            spec.amplitude = Amplitude::Channel(name);
            spec
        })
        .collect();
    let protocol = Protocol::new(0.0, 1.0, channels).unwrap();
    let eig = ssi.pi.eigen();
    let energies: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
    let shift = &eig.vectors * nonadiabat::linalg::diag(&energies) * eig.vectors.adjoint();
    let shift = nonadiabat::linalg::hermitian_part(&shift);
    LindbladModel::new(m.h_base().clone(), vec![], jumps, protocol)
        .unwrap()
        .with_hamiltonian_term(Channel::ramp("shift", (0.0, 0.0), (1.0, 1.0)).unwrap(), shift)
        .unwrap()
}

pub fn generated(d: usize, seed: u64) -> (LindbladModel, SteadyStateInfo) {
    generate_consistent_model(d, seed).unwrap()
}

pub fn random_states(d: usize, n: usize, seed: u64) -> Vec<DensityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_full_rank_density(d, 0.2, &mut rng)).collect()
}

/// `exp(ℒt)ρ₀` by the dense matrix exponential of the superoperator.
pub fn exact_evolution(m: &LindbladModel, rho0: &DensityMatrix, t: f64) -> DensityMatrix {
    let sup = m.at(0.0).unwrap().superoperator().into_matrix() * c(t, 0.0);
    let v = sup.exp() * nonadiabat::linalg::vectorize(rho0.matrix());
    let rho: CMat = nonadiabat::linalg::devectorize(&v, m.dim()).unwrap();
    nonadiabat::linalg::validate_density(&rho, 1e-9).unwrap()
}
