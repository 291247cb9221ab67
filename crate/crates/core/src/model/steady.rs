use serde::Serialize;

use super::LindbladModel;
use crate::consistency::extract_rep_weights;
use crate::error::{Error, Result};
use crate::linalg::{devectorize, frob, hermitian_part, CMat, CVec, DensityMatrix};

/// Relative ratio spread accepted when extracting privileged weights for a
/// steady state.
pub const WEIGHT_TOL: f64 = 1e-8;
/// Second-smallest singular values below this signal a non-unique kernel.
pub const GAP_FLOOR: f64 = 1e-9;
/// Minimum eigenvalue a steady state must exceed.
pub const PD_FLOOR: f64 = 1e-10;

/// Steady state `π_λ` with `ℒ(λ)π_λ = 0` and its privileged weights.
#[derive(Debug, Clone)]
pub struct SteadyStateInfo {
    pub pi: DensityMatrix,
    /// `ϖ_k` per jump; `None` where the jump is zero or not in privileged form.
    pub weights: Vec<Option<f64>>,
    /// Second-smallest singular value of the Liouvillian.
    pub gap: f64,
    /// `‖ℒπ‖_F`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSolution {
    /// Devectorized kernel vector, unnormalized.
    #[serde(skip)]
    pub matrix: CMat,
    pub smallest: f64,
    pub gap: f64,
}

impl KernelSolution {
    /// Hermitian part of the kernel matrix scaled to unit trace.
    pub fn unit_trace(&self) -> Result<CMat> {
        let trace = self.matrix.trace();
        if trace.norm() < 1e-12 {
            return Err(Error::InvalidModel("kernel vector is traceless".into()));
        }
        Ok(hermitian_part(&(&self.matrix / trace)))
    }
}

/// Smallest right singular vector of a superoperator matrix, devectorized.
pub fn kernel_of(superop: &CMat, dim: usize) -> Result<KernelSolution> {
    let n = dim * dim;
    if superop.nrows() != n || superop.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: superop.nrows(),
        });
    }
    let svd = superop.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let smallest = svd.singular_values[order[0]];
    let gap = if n > 1 { svd.singular_values[order[1]] } else { f64::INFINITY };
    let v = CVec::from_fn(n, |i, _| v_t[(order[0], i)].conj());
    let matrix = devectorize(&v, dim)?;
    Ok(KernelSolution { matrix, smallest, gap })
}

/// Unique positive-definite steady state at protocol time `t`.
pub fn steady_state(m: &LindbladModel, t: f64) -> Result<SteadyStateInfo> {
    let at = m.at(t)?;
    let sup = at.superoperator();
    let kernel = kernel_of(sup.matrix(), m.dim())?;
    if kernel.gap < GAP_FLOOR {
        return Err(Error::DegenerateSteadyState { gap: kernel.gap });
    }
    let pi = DensityMatrix::from_trusted(kernel.unit_trace()?);
    let min = pi.min_eigenvalue();
    if !(min > PD_FLOOR) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let residual = frob(&at.apply(pi.matrix()));
    let weights = at
        .jumps
        .iter()
        .map(|l| extract_rep_weights(&pi, l, WEIGHT_TOL).ok())
        .collect();
    Ok(SteadyStateInfo {
        pi,
        weights,
        gap: kernel.gap,
        residual,
    })
}
