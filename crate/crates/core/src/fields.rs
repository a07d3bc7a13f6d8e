//! Probability density fields on the circle.
//!
//! A `DensityField` stores nonnegative per-angle values with unit mass under
//! the grid quadrature. Densities are per unit angle, so the continuum
//! formulas transcribe directly.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{self, Direction};
use crate::error::{ModelError, Result};
use crate::geometry::{CircleGrid, DerivBackend, DerivOrder};

/// Mass defect tolerated by the field invariant.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

/// Nonnegative, unit-mass density on a `CircleGrid`.
#[derive(Debug, Clone)]
pub struct DensityField {
    grid: Arc<CircleGrid>,
    values: Vec<f64>,
}

impl DensityField {
    /// Validating constructor: values must be finite, nonnegative, and of
    /// unit mass within `MASS_TOL`.
    pub fn from_values(grid: &Arc<CircleGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(ModelError::InvalidInput(format!(
                "field has {} values on a grid of {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("density values"));
        }
        if let Some(v) = values.iter().find(|&&v| v < 0.0) {
            return Err(ModelError::InvalidInput(format!(
                "density has a negative cell value {v}"
            )));
        }
        let mass = grid.quadrature(&values)?;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(ModelError::InvalidInput(format!(
                "density mass {mass} deviates from 1 by more than {MASS_TOL}"
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Internal constructor for solver output, where mass drift is bounded
    /// by the step invariants instead of the constructor tolerance.
    pub(crate) fn from_values_trusted(grid: &Arc<CircleGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// The degenerate reference state ρ ≡ 1/(2π), with J = 0.
    pub fn uniform(grid: &Arc<CircleGrid>) -> Self {
        let v = 1.0 / (2.0 * PI);
        Self {
            grid: Arc::clone(grid),
            values: vec![v; grid.n_cells()],
        }
    }

    /// Density ∝ e^{κ cos(θ − φ)}, normalized by quadrature.
    pub fn von_mises(grid: &Arc<CircleGrid>, concentration: f64, mean_angle: f64) -> Result<Self> {
        if !concentration.is_finite() || concentration < 0.0 {
            return Err(ModelError::InvalidInput(format!(
                "von Mises concentration must be finite and nonnegative, got {concentration}"
            )));
        }
        let values: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&t| (concentration * (t - mean_angle).cos()).exp())
            .collect();
        let mass = grid.quadrature(&values)?;
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Equilibrium state times (1 + ε·g), where g has zero M-weighted mean
    /// and unit sup norm, so the sup-ratio distance to the equilibrium is
    /// exactly |ε|. Mode `seed = 0` uses the deterministic perturbation
    /// cos(k(θ − φ)); other seeds draw band-limited coefficients for modes
    /// 1..=k from a seeded generator.
    pub fn perturbed_equilibrium(
        grid: &Arc<CircleGrid>,
        direction: Direction,
        amplitude: f64,
        mode: u32,
        seed: u64,
    ) -> Result<Self> {
        if !amplitude.is_finite() || amplitude.abs() >= 1.0 {
            return Err(ModelError::InvalidInput(format!(
                "perturbation amplitude must satisfy |eps| < 1, got {amplitude}"
            )));
        }
        if mode < 1 {
            return Err(ModelError::InvalidInput(
                "perturbation mode must be >= 1".into(),
            ));
        }
        let m_field = equilibrium::fisher_von_mises(grid, direction);
        let m = m_field.values();
        let phi = direction.angle();
        let n = grid.n_cells();

        let mut g: Vec<f64> = if seed == 0 {
            grid.nodes()
                .iter()
                .map(|&t| (mode as f64 * (t - phi)).cos())
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = vec![0.0; n];
            for k in 1..=mode {
                let c: f64 = rng.gen_range(-1.0..1.0);
                let s: f64 = rng.gen_range(-1.0..1.0);
                for (i, &t) in grid.nodes().iter().enumerate() {
                    g[i] += c * (k as f64 * t).cos() + s * (k as f64 * t).sin();
                }
            }
            g
        };

        // zero M-weighted mean, then unit sup norm
        let weighted: Vec<f64> = g.iter().zip(m).map(|(&gi, &mi)| gi * mi).collect();
        let mean = grid.quadrature(&weighted)? / grid.quadrature(m)?;
        for gi in g.iter_mut() {
            *gi -= mean;
        }
        let sup = g.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
        if sup == 0.0 {
            return Err(ModelError::InvalidInput(
                "degenerate perturbation: g vanishes identically".into(),
            ));
        }
        let mut values: Vec<f64> = g
            .iter()
            .zip(m)
            .map(|(&gi, &mi)| mi * (1.0 + amplitude * gi / sup))
            .collect();
        if let Some(v) = values.iter().find(|&&v| v <= 0.0) {
            return Err(ModelError::InvalidInput(format!(
                "perturbed density is nonpositive ({v}) somewhere"
            )));
        }
        let mass = grid.quadrature(&values)?;
        for v in values.iter_mut() {
            *v /= mass;
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<CircleGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mass(&self) -> f64 {
        self.grid.quadrature(&self.values).unwrap_or(f64::NAN)
    }

    /// Quadrature-weighted distance between two fields on the same grid.
    pub fn distance(&self, other: &DensityField, norm: Norm) -> Result<f64> {
        if self.grid.n_cells() != other.grid.n_cells() {
            return Err(ModelError::GridMismatch {
                left: self.grid.n_cells(),
                right: other.grid.n_cells(),
            });
        }
        let diff: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(match norm {
            Norm::L1 => {
                let abs: Vec<f64> = diff.iter().map(|d| d.abs()).collect();
                self.grid.quadrature(&abs)?
            }
            Norm::L2 => {
                let sq: Vec<f64> = diff.iter().map(|d| d * d).collect();
                self.grid.quadrature(&sq)?.sqrt()
            }
            Norm::Linf => diff.iter().fold(0.0_f64, |acc, d| acc.max(d.abs())),
        })
    }

    /// Cyclic shift by `k` cells: result(θ_i) = self(θ_{i−k}).
    pub fn rotated_cells(&self, k: i64) -> Self {
        let n = self.grid.n_cells() as i64;
        let values = (0..n)
            .map(|i| self.values[(i - k).rem_euclid(n) as usize])
            .collect();
        Self {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    /// Rotation by an arbitrary angle via Fourier phase shift. Exact for
    /// band-limited fields; spectrally accurate for smooth ones.
    pub fn rotated(&self, alpha: f64) -> Result<Self> {
        use rustfft::num_complex::Complex64;
        let n = self.grid.n_cells();
        let mut buf: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let mut planner = rustfft::FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut buf);
        let half = n / 2;
        for (k, c) in buf.iter_mut().enumerate() {
            let freq = if k <= half {
                k as f64
            } else {
                k as f64 - n as f64
            };
            // e^{-i k α}; keep the Nyquist mode real
            let f = if k == half { 0.0 } else { freq };
            let phase = Complex64::new(0.0, -f * alpha).exp();
            *c *= phase;
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let values: Vec<f64> = buf.iter().map(|c| c.re * scale).collect();
        DensityField::from_values(&self.grid, values)
    }

    /// Spectral derivative of the density values.
    pub fn deriv(&self, order: DerivOrder) -> Vec<f64> {
        self.grid
            .deriv(&self.values, order, DerivBackend::Spectral)
            .expect("field values are finite")
    }

    /// Two-column CSV (theta, rho), shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,rho\n");
        for (t, v) in self.grid.nodes().iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}
