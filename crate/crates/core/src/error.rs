use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the toolkit. Physics checks that are expected to fail
/// on inconsistent models are reported through the audit types instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (anti-Hermitian part {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("operand has eigenvalue {min_eigenvalue:.3e} at or below floor {floor:.1e}")]
    SingularOperand { min_eigenvalue: f64, floor: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("trace {trace:.12} deviates from 1")]
    NotNormalized { trace: f64 },
    #[error("negative eigenvalue {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("time {t} outside protocol horizon [{start}, {end}]")]
    OutOfHorizon { t: f64, start: f64, end: f64 },
    #[error("steady state is not unique (second singular value {gap:.3e})")]
    DegenerateSteadyState { gap: f64 },
    #[error("fixed point of the map is not unique (second singular value {gap:.3e})")]
    DegenerateFixedPoint { gap: f64 },
    #[error("state is not positive-definite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("integrator drift at t = {t}: {detail}")]
    IntegratorDrift { t: f64, detail: String },
    #[error("operator is not in privileged form (ratio spread {spread:.3e})")]
    NotPrivileged { spread: f64 },
    #[error("operator is zero")]
    ZeroOperator,
    #[error("jump {index} has no declared reverse partner")]
    UnpairedJump { index: usize },
    #[error("state has eigenvalue {min_eigenvalue:.3e}; logarithm undefined")]
    SingularState { min_eigenvalue: f64 },
    #[error("privileged weight missing for jump {index}")]
    MissingWeights { index: usize },
    #[error("jump probability per step {total:.3e} is not below 0.1; reduce dt")]
    StepTooLarge { total: f64 },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("Kraus operators are not trace preserving (residual {residual:.3e})")]
    NotTracePreserving { residual: f64 },
    #[error("state is not invariant under the map (residual {residual:.3e})")]
    NotInvariant { residual: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
