//! Seeded random operators for fixtures and property tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, hermitian_part, trace_re, CMat, DensityMatrix, C64};

/// Entries with independent standard normal real and imaginary parts.
pub fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    CMat::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    hermitian_part(&ginibre(dim, rng))
}

/// Haar-distributed unitary from the phase-corrected QR factorization of a
/// Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let qr = ginibre(dim, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-distributed real orthogonal matrix, stored as a complex matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let g = nalgebra::DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q.map(|x| c(x, 0.0))
}

/// Wishart-distributed density matrix `GG†/Tr[GG†]`; full rank almost surely.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, rng);
    let w = &g * g.adjoint();
    let t = trace_re(&w);
    DensityMatrix::from_trusted(hermitian_part(&(w / c(t, 0.0))))
}

/// Random density matrix with every eigenvalue at least `floor / dim`.
pub fn random_full_rank_density<R: Rng + ?Sized>(dim: usize, floor: f64, rng: &mut R) -> DensityMatrix {
    random_density(dim, rng).mixed_with_identity(floor)
}

/// `dim` distinct positive probabilities summing to one, in ascending order,
/// with neighbouring values separated by at least `min_gap` before
/// normalization.
pub fn distinct_probabilities<R: Rng + ?Sized>(dim: usize, min_gap: f64, rng: &mut R) -> Vec<f64> {
    let mut raw: Vec<f64> = Vec::with_capacity(dim);
    let mut level = 0.0;
    for _ in 0..dim {
        level += min_gap + rng.random::<f64>();
        raw.push(level);
    }
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}
