use nonadiabat::kraus::{
    apply_map, classical_decomposition, classical_decomposition_in_bases, delta_d_pair, dual_cptp_check,
    generate_detailed_balance_map, invariant_state, mu_normalization_check,
};
use nonadiabat::linalg::{c, diag, frob, CMat, DensityMatrix};
use nonadiabat::random::{random_density, random_unitary};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `U diag(spectrum) U†` together with `U`.
fn state_with_spectrum(spectrum: &[f64], rng: &mut ChaCha8Rng) -> (DensityMatrix, CMat) {
    let u = random_unitary(spectrum.len(), rng);
    let rho = &u * diag(spectrum) * u.adjoint();
    let rho = nonadiabat::linalg::validate_density(&rho, 1e-12).unwrap();
    (rho, u)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_maps_are_monotone(seed in 0u64..10_000, d in 2usize..7) {
        let (e, info) = generate_detailed_balance_map(d, seed).unwrap();
        prop_assert!(e.tp_residual() < 1e-12);
        prop_assert!(dual_cptp_check(&e, &info.pi).unwrap().is_cptp);
        prop_assert!(mu_normalization_check(&e, &info).unwrap() < 1e-9);
        let solved = invariant_state(&e).unwrap();
        prop_assert!(frob(&(solved.matrix() - info.pi.matrix())) < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
        let rho = random_density(d, &mut rng);
        let dec = classical_decomposition(&e, &info, &rho).unwrap();
        let (operator, classical) = delta_d_pair(&e, &info, &rho).unwrap();
        prop_assert!(classical <= 1e-10 && operator <= 1e-10);
        prop_assert!((operator - classical).abs() <= 1e-9 * (1.0 + operator.abs()));
        prop_assert!(dec.stochastic_residual < 1e-9);
        prop_assert!(dec.push_forward_residual < 1e-9);
        prop_assert!(dec.convexity_bound.abs() < 1e-9);
        prop_assert!(dec.w.iter().flatten().flatten().all(|&x| x >= 0.0));
    }

    #[test]
    fn degenerate_spectra_do_not_change_the_classical_value(seed in 0u64..10_000, d in 3usize..6) {
        let (e, info) = generate_detailed_balance_map(d, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
        // Spectrum with a two-fold degenerate top eigenvalue.
        let mut spectrum: Vec<f64> = (0..d).map(|i| 1.0 + i as f64).collect();
        spectrum[d - 1] = spectrum[d - 2];
        let total: f64 = spectrum.iter().sum();
        spectrum.iter_mut().for_each(|x| *x /= total);
        spectrum.sort_by(|a, b| b.total_cmp(a));
        let (rho, u) = state_with_spectrum(&spectrum, &mut rng);
        let out = apply_map(&e, &rho).unwrap();
        let eig = out.eigen();
        let n = eig.dim();
        let p_prime: Vec<f64> = eig.values.iter().rev().copied().collect();
        let e_basis = CMat::from_fn(n, n, |i, j| eig.vectors[(i, n - 1 - j)]);

        let reference = classical_decomposition_in_bases(&e, &info, &spectrum, &u, &p_prime, &e_basis).unwrap();
        let mut block = CMat::identity(d, d);
        block.view_mut((0, 0), (2, 2)).copy_from(&random_unitary(2, &mut rng));
        let remixed_basis = &u * block;
        let remixed = classical_decomposition_in_bases(&e, &info, &spectrum, &remixed_basis, &p_prime, &e_basis).unwrap();
        prop_assert!((reference.delta_d - remixed.delta_d).abs() < 1e-9);
        let (operator, _) = delta_d_pair(&e, &info, &rho).unwrap();
        prop_assert!((operator - remixed.delta_d).abs() < 1e-9 * (1.0 + operator.abs()));
    }
}

#[test]
fn remixing_changes_individual_weights() {
    let (e, info) = generate_detailed_balance_map(3, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spectrum = [0.4, 0.4, 0.2];
    let (rho, u) = state_with_spectrum(&spectrum, &mut rng);
    let out = apply_map(&e, &rho).unwrap();
    let eig = out.eigen();
    let p_prime: Vec<f64> = eig.values.iter().rev().copied().collect();
    let e_basis = CMat::from_fn(3, 3, |i, j| eig.vectors[(i, 2 - j)]);
    let a = classical_decomposition_in_bases(&e, &info, &spectrum, &u, &p_prime, &e_basis).unwrap();
    let mut block = CMat::identity(3, 3);
    let s = 0.5f64.sqrt();
    block[(0, 0)] = c(s, 0.0);
    block[(0, 1)] = c(s, 0.0);
    block[(1, 0)] = c(-s, 0.0);
    block[(1, 1)] = c(s, 0.0);
    let b = classical_decomposition_in_bases(&e, &info, &spectrum, &(&u * block), &p_prime, &e_basis).unwrap();
    let moved = a.w.iter().flatten().flatten()
        .zip(b.w.iter().flatten().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(moved > 1e-6);
    assert!((a.delta_d - b.delta_d).abs() < 1e-10);
}
