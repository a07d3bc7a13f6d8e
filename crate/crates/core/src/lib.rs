//! Numerical laboratory for the circle-valued Kolmogorov–Vicsek alignment
//! model: a positivity-preserving finite-volume solver for the nonlinear
//! nonlocal Fokker–Planck equation on S¹, entropy/Fisher-information
//! diagnostics, verification harnesses for the functional inequalities
//! driving the exponential relaxation to the Fisher–von Mises family, the
//! closed-form decay-rate constants, and exact circular optimal transport.

pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod inequalities;
pub mod rates;
pub mod solver;
pub mod transport;

#[cfg(test)]
pub mod test_oracles;

pub use error::{ModelError, Result};
