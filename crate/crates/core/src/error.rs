//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Error)]
pub enum ModelError {
    /// A constructor or operation precondition failed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two fields live on grids of different size.
    #[error("grid mismatch: {left} cells vs {right} cells")]
    GridMismatch { left: usize, right: usize },

    /// An input contained NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// |J| fell at or below the configured tolerance. The dynamics is
    /// singular at J = 0; this is surfaced as a hard error, never
    /// regularized.
    #[error("vanishing momentum: |J| = {magnitude:.3e} <= tol = {tol:.3e}{}", fmt_time(.t))]
    VanishingMomentum {
        magnitude: f64,
        tol: f64,
        t: Option<f64>,
    },

    /// Explicit step size exceeds the parabolic stability bound.
    #[error("CFL violation at t = {t}: dt = {dt:.3e} > dt_max = {dt_max:.3e}")]
    CflViolation { dt: f64, dt_max: f64, t: f64 },

    /// A lemma hypothesis does not hold for the supplied data.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A record index without the required neighbours.
    #[error("index {index} out of range for trajectory of length {len}")]
    BoundaryIndex { index: usize, len: usize },

    /// The trajectory does not reach far enough to run the requested check.
    #[error("trajectory too short: covers [0, {covered}] but [0, {needed}] is required")]
    TrajectoryTooShort { needed: f64, covered: f64 },

    /// A quantity the theory guarantees was not observed numerically.
    /// A reportable finding, distinct from ordinary runtime failures.
    #[error("theory violation: {0}")]
    TheoryViolation(String),
}

fn fmt_time(t: &Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t = {t}"),
        None => String::new(),
    }
}
