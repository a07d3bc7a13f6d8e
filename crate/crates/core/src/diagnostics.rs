//! Relative entropy, Fisher information, free energy, and the bounds that
//! tie them together along trajectories.
//!
//! Log-taking diagnostics clamp their argument at 1e−300 and flag cells
//! below 1e−14; the solver itself never clamps.

use crate::equilibrium::{self, Direction, Momentum};
use crate::error::{ModelError, Result};
use crate::fields::{DensityField, Norm};
use crate::geometry::{DerivBackend, DerivOrder};
use crate::solver::Trajectory;

/// Clamp for log arguments, guarding against roundoff-level zeros.
pub const LOG_FLOOR: f64 = 1e-300;
/// Cells below this value raise the low-density flag on the record.
pub const LOW_DENSITY_FLAG: f64 = 1e-14;

/// Per-time snapshot of every functional the theory tracks.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// H(ρ | M_{Ω_ρ})
    pub relative_entropy: f64,
    /// I(ρ | M_{Ω_ρ})
    pub fisher_information: f64,
    /// E(ρ) = ∫ ρ log ρ − |J|
    pub free_energy: f64,
    pub momentum: Momentum,
    pub omega: Direction,
    /// ‖ρ − M_{Ω_ρ}‖₁
    pub l1_to_equilibrium: f64,
    /// ‖ρ M_{Ω_ρ}^{−1} − 1‖_∞
    pub sup_ratio: f64,
    pub low_density: bool,
}

/// H(ρ | ref) = ∫ ρ log(ρ/ref); cells with ρ = 0 contribute 0.
pub fn relative_entropy(rho: &DensityField, reference: &DensityField) -> Result<f64> {
    check_same_grid(rho, reference)?;
    check_positive(reference, "reference density")?;
    let integrand: Vec<f64> = rho
        .values()
        .iter()
        .zip(reference.values())
        .map(|(&r, &m)| {
            if r == 0.0 {
                0.0
            } else {
                r * (r.max(LOG_FLOOR) / m).ln()
            }
        })
        .collect();
    rho.grid().quadrature(&integrand)
}

/// I(ρ | ref) = ∫ |∂_θ log(ρ/ref)|² ρ, spectral differentiation of the
/// log-ratio (better conditioned than differentiating ρ and dividing).
pub fn fisher_information(rho: &DensityField, reference: &DensityField) -> Result<f64> {
    check_same_grid(rho, reference)?;
    check_positive(rho, "density")?;
    check_positive(reference, "reference density")?;
    let log_ratio: Vec<f64> = rho
        .values()
        .iter()
        .zip(reference.values())
        .map(|(&r, &m)| (r.max(LOG_FLOOR) / m).ln())
        .collect();
    let d = rho
        .grid()
        .deriv(&log_ratio, DerivOrder::First, DerivBackend::Spectral)?;
    let integrand: Vec<f64> = d
        .iter()
        .zip(rho.values())
        .map(|(&du, &r)| du * du * r)
        .collect();
    rho.grid().quadrature(&integrand)
}

/// E(ρ) = ∫ ρ log ρ − |J_ρ|.
pub fn free_energy(rho: &DensityField) -> f64 {
    let integrand: Vec<f64> = rho
        .values()
        .iter()
        .map(|&r| {
            if r == 0.0 {
                0.0
            } else {
                r * r.max(LOG_FLOOR).ln()
            }
        })
        .collect();
    let entropy = rho
        .grid()
        .quadrature(&integrand)
        .expect("field values are finite");
    entropy - equilibrium::momentum(rho).magnitude()
}

/// Full snapshot of a state against its own moving equilibrium.
pub fn compute_record(t: f64, rho: &DensityField, momentum_tol: f64) -> Result<DiagnosticsRecord> {
    let j = equilibrium::momentum(rho);
    let mag = j.magnitude();
    if mag <= momentum_tol {
        return Err(ModelError::VanishingMomentum {
            magnitude: mag,
            tol: momentum_tol,
            t: Some(t),
        });
    }
    let omega = Direction::from_vector(j.x, j.y)?;
    let m = equilibrium::fisher_von_mises(rho.grid(), omega);
    let h = relative_entropy(rho, &m)?;
    let i = fisher_information(rho, &m)?;
    let e = free_energy(rho);
    let l1 = rho.distance(&m, Norm::L1)?;
    let sup_ratio = rho
        .values()
        .iter()
        .zip(m.values())
        .map(|(&r, &mm)| (r / mm - 1.0).abs())
        .fold(0.0_f64, f64::max);
    let low_density = rho.values().iter().any(|&v| v < LOW_DENSITY_FLAG);
    Ok(DiagnosticsRecord {
        t,
        relative_entropy: h,
        fisher_information: i,
        free_energy: e,
        momentum: j,
        omega,
        l1_to_equilibrium: l1,
        sup_ratio,
        low_density,
    })
}

/// |(H_{i+1} − H_{i−1})/(2h) + I_i| / max(I_i, 1e−12) at a record with
/// uniformly spaced neighbours.
pub fn entropy_production_residual(trajectory: &Trajectory, index: usize) -> Result<f64> {
    let recs = &trajectory.records;
    if index == 0 || index + 1 >= recs.len() {
        return Err(ModelError::BoundaryIndex {
            index,
            len: recs.len(),
        });
    }
    let (tm, t0, tp) = (
        recs[index - 1].diagnostics.t,
        recs[index].diagnostics.t,
        recs[index + 1].diagnostics.t,
    );
    let h_left = t0 - tm;
    let h_right = tp - t0;
    if (h_left - h_right).abs() > 1e-9 * h_left.max(h_right) {
        return Err(ModelError::InvalidInput(format!(
            "records around index {index} are not uniformly spaced ({h_left} vs {h_right})"
        )));
    }
    let dh = (recs[index + 1].diagnostics.relative_entropy
        - recs[index - 1].diagnostics.relative_entropy)
        / (tp - tm);
    let i0 = recs[index].diagnostics.fisher_information;
    Ok((dh + i0).abs() / i0.max(1e-12))
}

/// Outcome of the sup-ratio bound ‖ρM^{−1} − 1‖_∞ ≤ C_M^{−1} e √I.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SupRatioCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn sup_ratio_bound_check(rho: &DensityField, omega: Direction) -> Result<SupRatioCheck> {
    check_positive(rho, "density")?;
    let m = equilibrium::fisher_von_mises(rho.grid(), omega);
    let lhs = rho
        .values()
        .iter()
        .zip(m.values())
        .map(|(&r, &mm)| (r / mm - 1.0).abs())
        .fold(0.0_f64, f64::max);
    let i = fisher_information(rho, &m)?;
    let rhs = std::f64::consts::E / equilibrium::normalizer_cm() * i.sqrt();
    Ok(SupRatioCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-10,
    })
}

fn check_same_grid(a: &DensityField, b: &DensityField) -> Result<()> {
    if a.grid().n_cells() != b.grid().n_cells() {
        return Err(ModelError::GridMismatch {
            left: a.grid().n_cells(),
            right: b.grid().n_cells(),
        });
    }
    Ok(())
}

fn check_positive(rho: &DensityField, what: &str) -> Result<()> {
    if rho.min_value() <= 0.0 {
        return Err(ModelError::InvalidInput(format!(
            "{what} has a nonpositive cell ({})",
            rho.min_value()
        )));
    }
    Ok(())
}
