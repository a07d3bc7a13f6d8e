//! Momentum, mean direction, and the equilibrium family C_M e^{ω·Ω}.
//!
//! The normalizer C_M and the equilibrium momentum strength m are
//! Ω-independent constants; both are computed once by high-resolution
//! quadrature and cached.

use std::sync::Arc;
use std::sync::OnceLock;

use crate::error::{ModelError, Result};
use crate::fields::DensityField;
use crate::geometry::{kahan_sum, CircleGrid};

/// Default tolerance below which |J| is treated as vanishing.
pub const DEFAULT_MOMENTUM_TOL: f64 = 1e-10;

/// First trigonometric moment J = ∫ ω ρ dω.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Momentum {
    pub x: f64,
    pub y: f64,
}

impl Momentum {
    pub fn magnitude(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Unit vector on the circle.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Direction {
    x: f64,
    y: f64,
}

impl Direction {
    pub fn from_angle(phi: f64) -> Self {
        Self {
            x: phi.cos(),
            y: phi.sin(),
        }
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn from_vector(x: f64, y: f64) -> Result<Self> {
        let n = x.hypot(y);
        if !n.is_finite() || n == 0.0 {
            return Err(ModelError::InvalidInput(format!(
                "cannot normalize direction from ({x}, {y})"
            )));
        }
        Ok(Self { x: x / n, y: y / n })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn angle(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotated(&self, alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Self {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

/// Component-wise quadrature of (cos θ · ρ, sin θ · ρ).
pub fn momentum(rho: &DensityField) -> Momentum {
    let grid = rho.grid();
    let mut jx = 0.0;
    let mut cx = 0.0;
    let mut jy = 0.0;
    let mut cy = 0.0;
    for ((&v, &c), &s) in rho
        .values()
        .iter()
        .zip(grid.cos_nodes())
        .zip(grid.sin_nodes())
    {
        let tx = v * c - cx;
        let sx = jx + tx;
        cx = (sx - jx) - tx;
        jx = sx;
        let ty = v * s - cy;
        let sy = jy + ty;
        cy = (sy - jy) - ty;
        jy = sy;
    }
    Momentum {
        x: jx * grid.spacing(),
        y: jy * grid.spacing(),
    }
}

/// J/|J|; errors with `VanishingMomentum` when |J| <= tol.
pub fn mean_direction(rho: &DensityField, tol: f64) -> Result<Direction> {
    let j = momentum(rho);
    let mag = j.magnitude();
    if mag <= tol {
        return Err(ModelError::VanishingMomentum {
            magnitude: mag,
            tol,
            t: None,
        });
    }
    Ok(Direction {
        x: j.x / mag,
        y: j.y / mag,
    })
}

/// The equilibrium density C_M e^{ω·Ω} sampled at the grid nodes.
pub fn fisher_von_mises(grid: &Arc<CircleGrid>, direction: Direction) -> DensityField {
    let cm = normalizer_cm();
    let values: Vec<f64> = grid
        .cos_nodes()
        .iter()
        .zip(grid.sin_nodes())
        .map(|(&c, &s)| cm * (c * direction.x + s * direction.y).exp())
        .collect();
    DensityField::from_values_trusted(grid, values)
}

const CONSTANT_RESOLUTION: usize = 1 << 14;

/// C_M = 1 / ∫ e^{ω·Ω} dω, independent of Ω by rotation invariance.
pub fn normalizer_cm() -> f64 {
    static CM: OnceLock<f64> = OnceLock::new();
    *CM.get_or_init(|| {
        let n = CONSTANT_RESOLUTION;
        let dth = 2.0 * std::f64::consts::PI / n as f64;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * dth).cos().exp()).collect();
        1.0 / (kahan_sum(&vals) * dth)
    })
}

/// m = |∫ ω C_M e^{ω·Ω} dω|, the equilibrium momentum strength.
pub fn equilibrium_momentum_m() -> f64 {
    static M: OnceLock<f64> = OnceLock::new();
    *M.get_or_init(|| {
        let n = CONSTANT_RESOLUTION;
        let dth = 2.0 * std::f64::consts::PI / n as f64;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * dth;
                t.cos() * t.cos().exp()
            })
            .collect();
        normalizer_cm() * kahan_sum(&vals) * dth
    })
}
