//! Dense complex-matrix foundation: Hermitian eigensystems, functions of
//! positive matrices, column-stacked superoperators and certified density
//! matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative Hermiticity tolerance for eigendecomposition inputs.
pub const TOL_HERM: f64 = 1e-10;
/// Eigenvalues at or below this floor make a logarithm undefined.
pub const LOG_FLOOR: f64 = 1e-13;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Builds a complex matrix from real row-major entries.
pub fn real_matrix(dim: usize, rows: &[f64]) -> CMat {
    assert_eq!(rows.len(), dim * dim, "expected {} entries", dim * dim);
    CMat::from_fn(dim, dim, |i, j| c(rows[i * dim + j], 0.0))
}

pub fn diag(values: &[f64]) -> CMat {
    let n = values.len();
    CMat::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { ZERO })
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

/// Frobenius norm.
#[inline]
pub fn frob(m: &CMat) -> f64 {
    m.norm()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// `‖M − M†‖_F`.
pub fn hermiticity_residual(m: &CMat) -> f64 {
    frob(&(m - m.adjoint()))
}

/// `Re Tr[AB]` without forming the product.
pub fn trace_product_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)] * b[(j, i)];
            acc += x.re;
        }
    }
    acc
}

pub fn trace_re(m: &CMat) -> f64 {
    m.trace().re
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

fn check_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    pub fn vector(&self, i: usize) -> CVec {
        self.vectors.column(i).into_owned()
    }

    /// `V f(w) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (j, &w) in self.values.iter().enumerate() {
            let fw = f(w);
            for i in 0..n {
                scaled[(i, j)] *= fw;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMat {
        self.map(|w| w)
    }
}

/// Hermitian eigendecomposition. The input is symmetrized after the
/// Hermiticity check.
pub fn hermitian_eig(m: &CMat) -> Result<HermitianEigen> {
    check_square(m)?;
    let residual = hermiticity_residual(m);
    if residual > TOL_HERM * frob(m) {
        return Err(Error::NotHermitian { residual });
    }
    Ok(eig_of_hermitian_part(m))
}

pub(crate) fn eig_of_hermitian_part(m: &CMat) -> HermitianEigen {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Principal logarithm of a positive-definite matrix.
pub fn matrix_log_pd(m: &CMat, floor: f64) -> Result<CMat> {
    let eig = hermitian_eig(m)?;
    log_from_eig(&eig, floor)
}

pub fn log_from_eig(eig: &HermitianEigen, floor: f64) -> Result<CMat> {
    let min = eig.min();
    if !(min > floor) {
        return Err(Error::SingularOperand {
            min_eigenvalue: min,
            floor,
        });
    }
    Ok(eig.map(f64::ln))
}

/// Inverse of a positive-definite matrix through its eigensystem.
pub fn inverse_pd(m: &CMat, floor: f64) -> Result<CMat> {
    let eig = hermitian_eig(m)?;
    if !(eig.min() > floor) {
        return Err(Error::SingularOperand {
            min_eigenvalue: eig.min(),
            floor,
        });
    }
    Ok(eig.map(f64::recip))
}

/// Column-stacking vectorization: columns are concatenated left to right.
pub fn vectorize(m: &CMat) -> CVec {
    // nalgebra storage is column-major, so this is the column stack.
    CVec::from_column_slice(m.as_slice())
}

pub fn devectorize(v: &CVec, dim: usize) -> Result<CMat> {
    if v.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            found: v.len(),
        });
    }
    Ok(CMat::from_column_slice(dim, dim, v.as_slice()))
}

/// Linear map on `dim × dim` matrices acting on column-stacked vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: CMat,
}

impl SuperOperator {
    pub fn new(dim: usize, matrix: CMat) -> Result<Self> {
        let n = dim * dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { dim, matrix })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            matrix: CMat::zeros(dim * dim, dim * dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: CMat::identity(dim * dim, dim * dim),
        }
    }

    /// Represents `ρ ↦ AρB`, i.e. `Bᵀ ⊗ A` under column stacking.
    pub fn left_right(a: &CMat, b: &CMat) -> Result<Self> {
        let dim = check_square(a)?;
        if check_square(b)? != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: b.nrows(),
            });
        }
        Ok(Self {
            dim,
            matrix: b.transpose().kronecker(a),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let v = &self.matrix * vectorize(rho);
        CMat::from_column_slice(self.dim, self.dim, v.as_slice())
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn norm(&self) -> f64 {
        frob(&self.matrix)
    }

    pub fn add_scaled(&mut self, other: &SuperOperator, scale: C64) {
        self.matrix += &other.matrix * scale;
    }
}

pub fn build_left_right_superop(a: &CMat, b: &CMat) -> Result<SuperOperator> {
    SuperOperator::left_right(a, b)
}

/// A Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(identity(dim) * c(1.0 / dim as f64, 0.0))
    }

    pub fn from_diagonal(p: &[f64]) -> Result<Self> {
        validate_density(&diag(p), 1e-10)
    }

    /// `|ψ⟩⟨ψ|` after normalizing `ψ`.
    pub fn pure(psi: &CVec) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::ZeroOperator);
        }
        let psi = psi / c(norm, 0.0);
        Ok(Self(&psi * psi.adjoint()))
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut m = CMat::zeros(dim, dim);
        m[(index, index)] = ONE;
        Self(m)
    }

    pub fn eigen(&self) -> HermitianEigen {
        eig_of_hermitian_part(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().min()
    }

    /// `(1 − ε)ρ + εI/d`.
    pub fn mixed_with_identity(&self, epsilon: f64) -> Self {
        let d = self.dim();
        Self(&self.0 * c(1.0 - epsilon, 0.0) + identity(d) * c(epsilon / d as f64, 0.0))
    }

    pub(crate) fn from_trusted(m: CMat) -> Self {
        Self(m)
    }
}

/// Symmetrizes `ρ` and certifies it as a density matrix within `tol`.
pub fn validate_density(rho: &CMat, tol: f64) -> Result<DensityMatrix> {
    check_square(rho)?;
    let residual = hermiticity_residual(rho);
    if residual > tol {
        return Err(Error::NotHermitian { residual });
    }
    let sym = hermitian_part(rho);
    let trace = trace_re(&sym);
    if (trace - 1.0).abs() > tol {
        return Err(Error::NotNormalized { trace });
    }
    let min = eig_of_hermitian_part(&sym).min();
    if min < -tol {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    Ok(DensityMatrix(sym))
}

/// `½‖A − B‖₁` for Hermitian arguments.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    let eig = eig_of_hermitian_part(&(a - b));
    0.5 * eig.values.iter().map(|w| w.abs()).sum::<f64>()
}
