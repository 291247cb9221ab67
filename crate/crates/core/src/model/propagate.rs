use super::{LindbladModel, ModelAt};
use crate::error::{Error, Result};
use crate::linalg::{c, eig_of_hermitian_part, hermitian_part, trace_re, CMat, DensityMatrix};

/// Trace or positivity drift beyond this aborts integration.
pub const DRIFT_TOL: f64 = 1e-8;

/// Number of steps and the uniform step size `h ≤ dt` covering `[t0, t1]`.
pub fn step_grid(t0: f64, t1: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(t1 >= t0) {
        return Err(Error::InvalidArgument(format!("interval [{t0}, {t1}] is empty")));
    }
    if t1 == t0 {
        return Ok((0, dt));
    }
    let n = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n, (t1 - t0) / n as f64))
}

/// One fourth-order step of `ρ̇ = ℒ(λ_t)ρ` from `t` to `t + h`.
pub fn rk4_step(m: &LindbladModel, t: f64, rho: &CMat, h: f64) -> Result<CMat> {
    let a0 = m.at(t)?;
    let a1 = m.at(t + 0.5 * h)?;
    let a2 = m.at(t + h)?;
    Ok(rk4_with(&a0, &a1, &a2, rho, h))
}

fn rk4_with(a0: &ModelAt, a1: &ModelAt, a2: &ModelAt, rho: &CMat, h: f64) -> CMat {
    let half = c(0.5 * h, 0.0);
    let k1 = a0.apply(rho);
    let k2 = a1.apply(&(rho + &k1 * half));
    let k3 = a1.apply(&(rho + &k2 * half));
    let k4 = a2.apply(&(rho + &k3 * c(h, 0.0)));
    rho + (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0)
}

/// Symmetrizes an integrated state and renormalizes small trace drift.
pub(crate) fn certify(t: f64, m: &CMat) -> Result<DensityMatrix> {
    let sym = hermitian_part(m);
    let trace = trace_re(&sym);
    if (trace - 1.0).abs() > DRIFT_TOL {
        return Err(Error::IntegratorDrift {
            t,
            detail: format!("trace {trace:.12}"),
        });
    }
    let sym = sym / c(trace, 0.0);
    let min = eig_of_hermitian_part(&sym).min();
    if min < -DRIFT_TOL {
        return Err(Error::IntegratorDrift {
            t,
            detail: format!("minimum eigenvalue {min:.3e}"),
        });
    }
    Ok(DensityMatrix::from_trusted(sym))
}

/// Integrates the master equation from `t0` to `t1` with fixed steps of at
/// most `dt`, returning every grid state including the initial one.
pub fn propagate(
    m: &LindbladModel,
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Vec<(f64, DensityMatrix)>> {
    if rho0.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: rho0.dim(),
        });
    }
    m.protocol().check(t0)?;
    m.protocol().check(t1)?;
    let (n, h) = step_grid(t0, t1, dt)?;
    let frozen = if m.protocol().is_constant() { Some(m.at(t0)?) } else { None };
    let mut out = Vec::with_capacity(n + 1);
    out.push((t0, rho0.clone()));
    let mut rho = rho0.matrix().clone();
    for i in 0..n {
        let t = t0 + i as f64 * h;
        let next = match &frozen {
            Some(at) => rk4_with(at, at, at, &rho, h),
            None => rk4_step(m, t, &rho, h)?,
        };
        let t_next = t0 + (i + 1) as f64 * h;
        let state = certify(t_next, &next)?;
        rho = state.matrix().clone();
        out.push((t_next, state));
    }
    Ok(out)
}
