mod common;

use common::{generated, qubit_ramp, ramped_generated, random_states};
use nonadiabat::linalg::{frob, hermiticity_residual, trace_re, vectorize};
use nonadiabat::model::{liouvillian_apply, liouvillian_matrix, propagate, steady_state};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn superoperator_matches_direct_action(seed in 0u64..1000, d in 2usize..6, t in 0.0f64..1.0) {
        let m = ramped_generated(d, seed);
        let rho = random_states(d, 1, seed).remove(0);
        let direct = liouvillian_apply(&m, t, rho.matrix()).unwrap();
        let via = liouvillian_matrix(&m, t).unwrap().apply(rho.matrix());
        prop_assert!(frob(&(direct.clone() - via)) < 1e-12 * (1.0 + frob(&direct)));
        prop_assert!(trace_re(&direct).abs() < 1e-12);
        prop_assert!(hermiticity_residual(&direct) < 1e-12);
    }

    #[test]
    fn steady_state_is_in_the_kernel(seed in 0u64..1000, d in 2usize..6) {
        let (m, _) = generated(d, seed);
        let ssi = steady_state(&m, 0.0).unwrap();
        let sup = liouvillian_matrix(&m, 0.0).unwrap();
        prop_assert!((sup.matrix() * vectorize(ssi.pi.matrix())).norm() < 1e-10);
        prop_assert!(ssi.residual < 1e-10);
    }
}

#[test]
fn driven_propagation_stays_physical() {
    let m = qubit_ramp();
    let rho0 = random_states(2, 1, 3).remove(0);
    let path = propagate(&m, &rho0, 0.0, 1.0, 1e-3).unwrap();
    assert_eq!(path.len(), 1001);
    for (_, rho) in &path {
        assert!((trace_re(rho.matrix()) - 1.0).abs() < 1e-12);
        assert!(rho.min_eigenvalue() > 0.0);
    }
    // Late in the ramp the state approaches the instantaneous steady state.
    let late = propagate(&m, &path.last().unwrap().1, 1.0, 1.0, 1e-3).unwrap();
    assert_eq!(late.len(), 1);
}
