//! Discrete-time picture: CPTP maps in Kraus form, their invariant states,
//! the dual map, scaling factors `πM_kπ⁻¹ = μ_kM_k`, and the classical
//! decomposition that exposes monotonicity of `D(·‖π)`.

mod classical;

pub use classical::{
    audit_map, classical_decomposition, classical_decomposition_in_bases, delta_d_pair,
    mu_normalization_check, ClassicalDecomposition, KrausAudit,
};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::consistency::weight_from_ratios;
use crate::error::{Error, Result};
use crate::linalg::{
    c, eig_of_hermitian_part, frob, hermiticity_residual, identity, inverse_pd, CMat,
    DensityMatrix, SuperOperator, LOG_FLOOR,
};
use crate::model::kernel_of;
use crate::random::{distinct_probabilities, random_unitary};

/// Bound on `‖Σ M_k†M_k − I‖_F`.
pub const TP_TOL: f64 = 1e-10;
/// Bound on `‖ℰ(π) − π‖_F` for a supplied invariant state.
pub const INVARIANCE_TOL: f64 = 1e-10;
/// Second-smallest singular value of `S − I` below which the fixed point is
/// not unique.
pub const FIXED_POINT_GAP_FLOOR: f64 = 1e-9;
/// Choi eigenvalues down to `−CHOI_TOL` count as nonnegative.
pub const CHOI_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KrausMap {
    kraus: Vec<CMat>,
}

impl KrausMap {
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let d = kraus.first().ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?.nrows();
        for m in &kraus {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: if m.nrows() != d { m.nrows() } else { m.ncols() },
                });
            }
        }
        let map = Self { kraus };
        let residual = map.tp_residual();
        if residual > TP_TOL {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(map)
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    /// `‖Σ M_k†M_k − I‖_F`.
    pub fn tp_residual(&self) -> f64 {
        let sum = self.kraus.iter().fold(CMat::zeros(self.dim(), self.dim()), |acc, m| acc + m.adjoint() * m);
        frob(&(sum - identity(self.dim())))
    }

    /// `Σ M_kXM_k†` for any square `X`.
    pub fn apply(&self, x: &CMat) -> CMat {
        self.kraus.iter().fold(CMat::zeros(self.dim(), self.dim()), |acc, m| acc + m * x * m.adjoint())
    }

    /// Heisenberg-picture adjoint `Σ M_k†XM_k`.
    pub fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.kraus.iter().fold(CMat::zeros(self.dim(), self.dim()), |acc, m| acc + m.adjoint() * x * m)
    }

    pub fn superoperator(&self) -> SuperOperator {
        let mut s = SuperOperator::zeros(self.dim());
        for m in &self.kraus {
            let term = SuperOperator::left_right(m, &m.adjoint()).expect("square Kraus operators");
            s.add_scaled(&term, c(1.0, 0.0));
        }
        s
    }

    /// The identity channel on `d` levels.
    pub fn identity(d: usize) -> Self {
        Self { kraus: vec![identity(d)] }
    }
}

pub fn apply_map(e: &KrausMap, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            found: rho.dim(),
        });
    }
    Ok(DensityMatrix::from_trusted(crate::linalg::hermitian_part(&e.apply(rho.matrix()))))
}

/// Unique fixed point `π = ℰ(π)` together with the uniqueness gap.
pub fn invariant_state_with_gap(e: &KrausMap) -> Result<(DensityMatrix, f64)> {
    let d = e.dim();
    let shifted = e.superoperator().into_matrix() - CMat::identity(d * d, d * d);
    let kernel = kernel_of(&shifted, d)?;
    if kernel.gap < FIXED_POINT_GAP_FLOOR {
        return Err(Error::DegenerateFixedPoint { gap: kernel.gap });
    }
    let pi = DensityMatrix::from_trusted(kernel.unit_trace()?);
    let min = pi.min_eigenvalue();
    if !(min > crate::model::PD_FLOOR) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok((pi, kernel.gap))
}

pub fn invariant_state(e: &KrausMap) -> Result<DensityMatrix> {
    invariant_state_with_gap(e).map(|x| x.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualCheck {
    pub is_cptp: bool,
    /// Smallest eigenvalue of the Hermitian part of the dual's Choi matrix.
    pub min_choi_eigenvalue: f64,
    /// `‖C − C†‖_F`; nonzero means the dual does not even preserve Hermiticity.
    pub choi_hermiticity_residual: f64,
    /// `max |Tr Ẽ(X) − Tr X|` over matrix units.
    pub trace_residual: f64,
}

/// The dual map `Ẽ(ρ) = πℰ†(π⁻¹ρ)`.
pub fn dual_apply(e: &KrausMap, pi: &CMat, pi_inv: &CMat, x: &CMat) -> CMat {
    pi * e.apply_adjoint(&(pi_inv * x))
}

/// Builds the Choi matrix `Σ_ij E_ij ⊗ Ẽ(E_ij)` of the dual map and checks
/// complete positivity and trace preservation.
pub fn dual_cptp_check(e: &KrausMap, pi: &DensityMatrix) -> Result<DualCheck> {
    let d = e.dim();
    let pi_inv = inverse_pd(pi.matrix(), LOG_FLOOR).map_err(|_| Error::SingularState {
        min_eigenvalue: pi.min_eigenvalue(),
    })?;
    let mut choi = CMat::zeros(d * d, d * d);
    let mut trace_residual: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let mut unit = CMat::zeros(d, d);
            unit[(i, j)] = c(1.0, 0.0);
            let image = dual_apply(e, pi.matrix(), &pi_inv, &unit);
            let expected = if i == j { 1.0 } else { 0.0 };
            trace_residual = trace_residual.max((image.trace() - c(expected, 0.0)).norm());
            choi.view_mut((i * d, j * d), (d, d)).copy_from(&image);
        }
    }
    let choi_hermiticity_residual = hermiticity_residual(&choi);
    let min_choi_eigenvalue = eig_of_hermitian_part(&choi).min();
    let is_cptp = choi_hermiticity_residual <= CHOI_TOL && min_choi_eigenvalue >= -CHOI_TOL && trace_residual <= CHOI_TOL;
    Ok(DualCheck {
        is_cptp,
        min_choi_eigenvalue,
        choi_hermiticity_residual,
        trace_residual,
    })
}

/// `μ_k` with `πM_kπ⁻¹ = μ_kM_k`, by entrywise ratios. Vanishing Kraus
/// operators get `μ = 1`.
pub fn extract_scaling_factors(e: &KrausMap, pi: &DensityMatrix, tol: f64) -> Result<Vec<f64>> {
    let pi_inv = inverse_pd(pi.matrix(), LOG_FLOOR).map_err(|_| Error::NotPositiveDefinite {
        min_eigenvalue: pi.min_eigenvalue(),
    })?;
    e.kraus
        .iter()
        .map(|m| match weight_from_ratios(pi.matrix(), &pi_inv, m, tol) {
            Err(Error::ZeroOperator) => Ok(1.0),
            other => other,
        })
        .collect()
}

/// Invariant state and scaling factors of a map in privileged form.
#[derive(Debug, Clone, Serialize)]
pub struct PrivilegedKrausInfo {
    #[serde(skip)]
    pub pi: DensityMatrix,
    pub mu: Vec<f64>,
    /// `‖ℰ(π) − π‖_F`.
    pub invariance_residual: f64,
}

impl PrivilegedKrausInfo {
    /// Uses a supplied invariant state, which must satisfy `ℰ(π) = π`.
    pub fn new(e: &KrausMap, pi: DensityMatrix, tol: f64) -> Result<Self> {
        if pi.dim() != e.dim() {
            return Err(Error::DimensionMismatch {
                expected: e.dim(),
                found: pi.dim(),
            });
        }
        let invariance_residual = frob(&(e.apply(pi.matrix()) - pi.matrix()));
        if invariance_residual > INVARIANCE_TOL {
            return Err(Error::NotInvariant {
                residual: invariance_residual,
            });
        }
        let mu = extract_scaling_factors(e, &pi, tol)?;
        Ok(Self {
            pi,
            mu,
            invariance_residual,
        })
    }

    /// Solves for the unique invariant state first.
    pub fn derive(e: &KrausMap, tol: f64) -> Result<Self> {
        Self::new(e, invariant_state(e)?, tol)
    }
}

/// Map with Kraus operators `√T_ij |π_i⟩⟨π_j|` for `i ≠ j` plus the diagonal
/// remainder `Σ_j √(1 − c_j)|π_j⟩⟨π_j|`, where `c_j = Σ_i T_ij < 1`.
/// The rates must satisfy `T_ij p_j = T_ji p_i`.
pub fn detailed_balance_map(p: &[f64], basis: &CMat, rates: &DMatrix<f64>) -> Result<(KrausMap, PrivilegedKrausInfo)> {
    let d = p.len();
    if basis.nrows() != d || basis.ncols() != d || rates.nrows() != d || rates.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: basis.nrows(),
        });
    }
    let column = |j: usize| basis.column(j).into_owned();
    let mut kraus = Vec::new();
    let mut mu = Vec::new();
    let mut remainder = CMat::zeros(d, d);
    for j in 0..d {
        let mut outflow = 0.0;
        for i in 0..d {
            if i == j {
                continue;
            }
            let t = rates[(i, j)];
            if t < 0.0 || (t * p[j] - rates[(j, i)] * p[i]).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "rates ({i},{j}) violate detailed balance or are negative"
                )));
            }
            outflow += t;
            if t > 0.0 {
                kraus.push(column(i) * column(j).adjoint() * c(t.sqrt(), 0.0));
                mu.push(p[i] / p[j]);
            }
        }
        if outflow >= 1.0 {
            return Err(Error::InvalidArgument(format!("column {j} leaks probability {outflow} >= 1")));
        }
        let v = column(j);
        remainder += &v * v.adjoint() * c((1.0 - outflow).sqrt(), 0.0);
    }
    kraus.push(remainder);
    mu.push(1.0);
    let pi = DensityMatrix::from_trusted(
        (0..d).fold(CMat::zeros(d, d), |acc, j| {
            let v = column(j);
            acc + &v * v.adjoint() * c(p[j], 0.0)
        }),
    );
    let map = KrausMap::new(kraus)?;
    let invariance_residual = frob(&(map.apply(pi.matrix()) - pi.matrix()));
    Ok((
        map,
        PrivilegedKrausInfo {
            pi,
            mu,
            invariance_residual,
        },
    ))
}

/// Random detailed-balance map with a non-degenerate invariant state in a
/// random orthonormal basis.
pub fn generate_detailed_balance_map(d: usize, seed: u64) -> Result<(KrausMap, PrivilegedKrausInfo)> {
    if !(2..=8).contains(&d) {
        return Err(Error::InvalidArgument(format!("dimension must be in 2..=8, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = distinct_probabilities(d, 0.3, &mut rng);
    let basis = random_unitary(d, &mut rng);
    let mut sym = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let k = 0.1 + rng.random::<f64>();
            sym[(i, j)] = k;
            sym[(j, i)] = k;
        }
    }
    let mut rates = DMatrix::<f64>::from_fn(d, d, |i, j| if i == j { 0.0 } else { sym[(i, j)] * (p[i] / p[j]).sqrt() });
    let max_outflow = (0..d).map(|j| rates.column(j).sum()).fold(0.0, f64::max);
    let target = 0.3 + 0.6 * rng.random::<f64>();
    rates *= target / max_outflow;
    detailed_balance_map(&p, &basis, &rates)
}

/// Kraus operators of a Haar-random isometry; a generic CPTP map.
pub fn random_cptp_map<R: Rng + ?Sized>(d: usize, n_kraus: usize, rng: &mut R) -> KrausMap {
    let u = random_unitary(d * n_kraus, rng);
    let kraus = (0..n_kraus)
        .map(|k| u.view((k * d, 0), (d, d)).into_owned())
        .collect();
    KrausMap { kraus }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, real_matrix};
    use crate::model::{sigma_minus, sigma_x};

    fn dephasing() -> KrausMap {
        KrausMap::new(vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])]).unwrap()
    }

    fn amplitude_damping(gamma: f64) -> KrausMap {
        // Basis (|e⟩, |g⟩): decay moves |e⟩ to |g⟩.
        KrausMap::new(vec![diag(&[(1.0 - gamma).sqrt(), 1.0]), sigma_minus() * c(gamma.sqrt(), 0.0)]).unwrap()
    }

    #[test]
    fn application_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = crate::random::random_density(3, &mut rng);
        let same = apply_map(&KrausMap::identity(3), &rho).unwrap();
        assert!(frob(&(same.matrix() - rho.matrix())) < 1e-15);

        let plus = crate::linalg::validate_density(&real_matrix(2, &[0.5, 0.5, 0.5, 0.5]), 1e-12).unwrap();
        let out = apply_map(&dephasing(), &plus).unwrap();
        assert!(frob(&(out.matrix() - diag(&[0.5, 0.5]))) < 1e-15);

        let p: f64 = 0.3;
        let flip = KrausMap::new(vec![identity(2) * c((1.0 - p).sqrt(), 0.0), sigma_x() * c(p.sqrt(), 0.0)]).unwrap();
        let out = apply_map(&flip, &DensityMatrix::basis_state(2, 0)).unwrap();
        assert!(frob(&(out.matrix() - diag(&[0.7, 0.3]))) < 1e-15);
        assert!(matches!(apply_map(&flip, &rho), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_non_trace_preserving() {
        assert!(matches!(
            KrausMap::new(vec![diag(&[1.0, 0.5])]),
            Err(Error::NotTracePreserving { .. })
        ));
    }

    #[test]
    fn invariant_state_examples() {
        let depolarizing = KrausMap::new(vec![
            identity(2) * c(0.5, 0.0),
            sigma_x() * c(0.5, 0.0),
            real_matrix(2, &[0.0, -1.0, 1.0, 0.0]) * c(0.0, 0.5),
            diag(&[0.5, -0.5]),
        ])
        .unwrap();
        let pi = invariant_state(&depolarizing).unwrap();
        assert!(frob(&(pi.matrix() - diag(&[0.5, 0.5]))) < 1e-12);
        assert!(matches!(invariant_state(&dephasing()), Err(Error::DegenerateFixedPoint { .. })));
        assert!(matches!(
            invariant_state(&amplitude_damping(0.3)),
            Err(Error::NotPositiveDefinite { .. })
        ));

        let (map, info) = two_level_fixture();
        let pi = invariant_state(&map).unwrap();
        assert!(frob(&(pi.matrix() - info.pi.matrix())) < 1e-10);
    }

    fn two_level_fixture() -> (KrausMap, PrivilegedKrausInfo) {
        let rates = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.6, 0.0]);
        detailed_balance_map(&[1.0 / 3.0, 2.0 / 3.0], &identity(2), &rates).unwrap()
    }

    #[test]
    fn two_level_detailed_balance_map() {
        let (map, info) = two_level_fixture();
        assert!(map.tp_residual() < 1e-12);
        assert!(info.invariance_residual < 1e-12);
        let mut sorted = info.mu.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - 0.5).abs() < 1e-15 && (sorted[1] - 1.0).abs() < 1e-15 && (sorted[2] - 2.0).abs() < 1e-15);
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.3, 0.0]);
        assert!(detailed_balance_map(&[1.0 / 3.0, 2.0 / 3.0], &identity(2), &bad).is_err());
    }

    #[test]
    fn dual_map_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pi = crate::random::random_full_rank_density(3, 0.3, &mut rng);
        let check = dual_cptp_check(&KrausMap::identity(3), &pi).unwrap();
        assert!(check.is_cptp);
        assert!(check.min_choi_eigenvalue.abs() < 1e-9);

        for seed in 0..10 {
            let (map, info) = generate_detailed_balance_map(2 + seed as usize % 5, seed).unwrap();
            assert!(dual_cptp_check(&map, &info.pi).unwrap().is_cptp);
        }

        let generic = random_cptp_map(3, 2, &mut rng);
        let pi = invariant_state(&generic).unwrap();
        let check = dual_cptp_check(&generic, &pi).unwrap();
        assert!(!check.is_cptp);
        assert!(check.trace_residual < 1e-9);

        assert!(matches!(
            dual_cptp_check(&generic, &DensityMatrix::basis_state(3, 0)),
            Err(Error::SingularState { .. })
        ));
    }

    #[test]
    fn scaling_factor_examples() {
        let pi = DensityMatrix::from_diagonal(&[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let commuting = KrausMap::new(vec![diag(&[0.6, 0.8]), diag(&[0.8, 0.6])]).unwrap();
        for mu in extract_scaling_factors(&commuting, &pi, 1e-9).unwrap() {
            assert!((mu - 1.0).abs() < 1e-14);
        }
        let decay = amplitude_damping(0.5);
        let mu = extract_scaling_factors(&decay, &pi, 1e-9).unwrap();
        assert!((mu[1] - 2.0).abs() < 1e-14);
        let flip = KrausMap::new(vec![identity(2) * c(0.8f64.sqrt(), 0.0), sigma_x() * c(0.2f64.sqrt(), 0.0)]).unwrap();
        assert!(matches!(
            extract_scaling_factors(&flip, &pi, 1e-9),
            Err(Error::NotPrivileged { .. })
        ));
    }

    #[test]
    fn generated_maps_have_reciprocal_factors() {
        for seed in 0..10 {
            let d = 2 + seed as usize % 7;
            let (map, info) = generate_detailed_balance_map(d, seed).unwrap();
            assert!(map.tp_residual() < 1e-12);
            assert!(info.invariance_residual < 1e-12);
            let recomputed = extract_scaling_factors(&map, &info.pi, 1e-8).unwrap();
            for (a, b) in recomputed.iter().zip(&info.mu) {
                assert!((a - b).abs() < 1e-8 * b);
            }
            // Transitions i←j and j←i are pushed in column order; find pairs by value.
            let transitions = &info.mu[..info.mu.len() - 1];
            for &m in transitions {
                assert!(transitions.iter().any(|&n| (m * n - 1.0).abs() < 1e-12));
            }
        }
    }
}
