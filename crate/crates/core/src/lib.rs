//! Nonadiabatic entropy production for open quantum systems.
//!
//! Lindblad models with time-dependent protocols, consistency checks for the
//! privileged representation of jump operators, entropy-rate accounting,
//! stochastic trajectory unravelings and the discrete-time Kraus picture.

pub mod consistency;
pub mod entropy;
pub mod error;
pub mod kraus;
pub mod linalg;
pub mod model;
pub mod random;
pub mod trajectory;

pub use error::{Error, Result};
pub use linalg::{CMat, DensityMatrix, SuperOperator, C64};
