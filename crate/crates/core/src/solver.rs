//! Finite-volume time integration of the alignment dynamics in angle
//! coordinates: ∂_t ρ = ∂_θ(∂_θ ρ − ρ u) with drift u(θ) = −sin(θ − φ) and
//! φ the angle of Ω_ρ, frozen within each step.
//!
//! The default flux is exponential fitting with the Bernoulli weights
//! B(x) = x/(e^x − 1), built from the potential U(θ) = −cos(θ − φ). With
//! s_i = U_{i+1} − U_i the face flux
//!
//!   F_{i+1/2} = (1/Δθ)·[B(s_i) ρ_i − B(−s_i) ρ_{i+1}]
//!
//! vanishes identically on the discrete Gibbs state ρ ∝ e^{−U} (because
//! B(−s) = e^s B(s)), so the equilibrium family is stationary at machine
//! precision. The implicit matrix has unit column sums (exact mass
//! conservation) and is an M-matrix (positivity).

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::equilibrium::{self, Direction, DEFAULT_MOMENTUM_TOL};
use crate::error::{ModelError, Result};
use crate::fields::DensityField;
use crate::geometry::CircleGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FluxScheme {
    ExponentialFitting,
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Stepping {
    SemiImplicit,
    Explicit,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SolverConfig {
    pub n_cells: usize,
    pub dt: f64,
    pub t_end: f64,
    pub momentum_tol: f64,
    pub flux_scheme: FluxScheme,
    pub stepping: Stepping,
    pub record_every: usize,
}

impl SolverConfig {
    pub fn new(n_cells: usize, dt: f64, t_end: f64) -> Self {
        Self {
            n_cells,
            dt,
            t_end,
            momentum_tol: DEFAULT_MOMENTUM_TOL,
            flux_scheme: FluxScheme::ExponentialFitting,
            stepping: Stepping::SemiImplicit,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ModelError::InvalidInput(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(ModelError::InvalidInput(format!(
                "t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        if self.record_every < 1 {
            return Err(ModelError::InvalidInput("record_every must be >= 1".into()));
        }
        if !(self.momentum_tol.is_finite() && self.momentum_tol > 0.0) {
            return Err(ModelError::InvalidInput(format!(
                "momentum_tol must be positive, got {}",
                self.momentum_tol
            )));
        }
        CircleGrid::new(self.n_cells).map(|_| ())
    }
}

#[derive(Debug, Clone)]
pub struct SimulationState {
    pub t: f64,
    pub rho: DensityField,
    pub omega: Direction,
    pub step_index: usize,
}

impl SimulationState {
    pub fn new(rho: DensityField, momentum_tol: f64) -> Result<Self> {
        let omega = equilibrium::mean_direction(&rho, momentum_tol)?;
        Ok(Self {
            t: 0.0,
            rho,
            omega,
            step_index: 0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub step_index: usize,
    pub rho: DensityField,
    pub diagnostics: DiagnosticsRecord,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.diagnostics.t).collect()
    }

    /// Spacing between the first two records (records are uniform except
    /// possibly the final one).
    pub fn record_spacing(&self) -> Option<f64> {
        (self.records.len() >= 2)
            .then(|| self.records[1].diagnostics.t - self.records[0].diagnostics.t)
    }

    /// Index of the record closest to time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            let d = (r.diagnostics.t - t).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Bernoulli function B(x) = x/(e^x − 1), with a series branch near zero
/// to avoid cancellation; B(0) = 1.
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // 1 − x/2 + x²/12 − x⁴/720 + O(x⁶)
        let x2 = x * x;
        1.0 - 0.5 * x + x2 / 12.0 - x2 * x2 / 720.0
    } else {
        x / x.exp_m1()
    }
}

/// Per-face coefficients (a_i, b_i) so that F_{i+1/2} = (a_i ρ_i − b_i ρ_{i+1})/Δθ.
fn face_coefficients(
    grid: &CircleGrid,
    omega: Direction,
    scheme: FluxScheme,
) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n_cells();
    let cos_n = grid.cos_nodes();
    let sin_n = grid.sin_nodes();
    match scheme {
        FluxScheme::ExponentialFitting => {
            // U_i = −cos(θ_i − φ) = −(cos θ_i Ωx + sin θ_i Ωy)
            let potential: Vec<f64> = (0..n)
                .map(|i| -(cos_n[i] * omega.x() + sin_n[i] * omega.y()))
                .collect();
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for i in 0..n {
                let s = potential[(i + 1) % n] - potential[i];
                a.push(bernoulli(s));
                b.push(bernoulli(-s));
            }
            (a, b)
        }
        FluxScheme::Central => {
            // drift u(θ) = −sin(θ − φ) at the face midpoint
            let cos_f = grid.cos_faces();
            let sin_f = grid.sin_faces();
            let half_h = 0.5 * grid.spacing();
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for i in 0..n {
                let u = -(sin_f[i] * omega.x() - cos_f[i] * omega.y());
                a.push(1.0 + half_h * u);
                b.push(1.0 - half_h * u);
            }
            (a, b)
        }
    }
}

/// Face fluxes F_{i+1/2} for a state, with Ω frozen at the given direction.
pub fn flux(rho: &DensityField, omega: Direction, scheme: FluxScheme) -> Vec<f64> {
    let grid = rho.grid();
    let n = grid.n_cells();
    let (a, b) = face_coefficients(grid, omega, scheme);
    let v = rho.values();
    (0..n)
        .map(|i| (a[i] * v[i] - b[i] * v[(i + 1) % n]) / grid.spacing())
        .collect()
}

/// Max-norm of the drift u(θ) = −sin(θ − φ) over the nodes.
fn max_drift(grid: &CircleGrid, omega: Direction) -> f64 {
    grid.cos_nodes()
        .iter()
        .zip(grid.sin_nodes())
        .map(|(&c, &s)| (s * omega.x() - c * omega.y()).abs())
        .fold(0.0_f64, f64::max)
}

/// Largest stable explicit step Δθ²/(2 + Δθ·max|drift|); the semi-implicit
/// step is unconditionally stable and returns `t_end`.
pub fn max_stable_dt(config: &SolverConfig, state: &SimulationState) -> f64 {
    match config.stepping {
        Stepping::SemiImplicit => config.t_end,
        Stepping::Explicit => {
            let grid = state.rho.grid();
            let h = grid.spacing();
            h * h / (2.0 + h * max_drift(grid, state.omega))
        }
    }
}

/// One time step with Ω frozen at the step's start.
pub fn step(state: &SimulationState, config: &SolverConfig) -> Result<SimulationState> {
    step_with_dt(state, config, config.dt)
}

fn step_with_dt(
    state: &SimulationState,
    config: &SolverConfig,
    dt: f64,
) -> Result<SimulationState> {
    let grid = state.rho.grid();
    let n = grid.n_cells();
    let j = equilibrium::momentum(&state.rho);
    let mag = j.magnitude();
    if mag <= config.momentum_tol {
        return Err(ModelError::VanishingMomentum {
            magnitude: mag,
            tol: config.momentum_tol,
            t: Some(state.t),
        });
    }
    let omega = Direction::from_vector(j.x, j.y)?;
    let (a, b) = face_coefficients(grid, omega, config.flux_scheme);
    let h = grid.spacing();
    let r = dt / (h * h);
    let v = state.rho.values();

    let new_values = match config.stepping {
        Stepping::Explicit => {
            let dt_max = h * h / (2.0 + h * max_drift(grid, omega));
            if dt > dt_max {
                return Err(ModelError::CflViolation {
                    dt,
                    dt_max,
                    t: state.t,
                });
            }
            // ρ_i − (dt/Δθ)(F_{i+1/2} − F_{i−1/2})
            (0..n)
                .map(|i| {
                    let ip = (i + 1) % n;
                    let im = (i + n - 1) % n;
                    let f_right = a[i] * v[i] - b[i] * v[ip];
                    let f_left = a[im] * v[im] - b[im] * v[i];
                    v[i] - r * (f_right - f_left)
                })
                .collect()
        }
        Stepping::SemiImplicit => {
            // (I + dt·A) ρ^{new} = ρ, row i:
            //   −r·a_{i−1} ρ_{i−1} + (1 + r(a_i + b_{i−1})) ρ_i − r·b_i ρ_{i+1}
            let mut diag = Vec::with_capacity(n);
            let mut lower = Vec::with_capacity(n);
            let mut upper = Vec::with_capacity(n);
            for i in 0..n {
                let im = (i + n - 1) % n;
                diag.push(1.0 + r * (a[i] + b[im]));
                lower.push(-r * a[im]);
                upper.push(-r * b[i]);
            }
            solve_cyclic_tridiagonal(&lower, &diag, &upper, v)?
        }
    };

    let rho = DensityField::from_values_trusted(grid, new_values);
    let omega_new =
        equilibrium::mean_direction(&rho, config.momentum_tol).map_err(|e| match e {
            ModelError::VanishingMomentum { magnitude, tol, .. } => ModelError::VanishingMomentum {
                magnitude,
                tol,
                t: Some(state.t + dt),
            },
            other => other,
        })?;
    Ok(SimulationState {
        t: state.t + dt,
        rho,
        omega: omega_new,
        step_index: state.step_index + 1,
    })
}

/// Integrate from `rho0` to `t_end`, recording every `record_every` steps
/// plus the initial and final states.
pub fn run(rho0: &DensityField, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    if rho0.grid().n_cells() != config.n_cells {
        return Err(ModelError::GridMismatch {
            left: rho0.grid().n_cells(),
            right: config.n_cells,
        });
    }
    if rho0.min_value() <= 0.0 {
        return Err(ModelError::InvalidInput(
            "initial density must be strictly positive".into(),
        ));
    }

    let n_steps = (config.t_end / config.dt - 1e-9).ceil().max(0.0) as usize;
    let mut state = SimulationState::new(rho0.clone(), config.momentum_tol)?;
    let mut records = Vec::with_capacity(n_steps / config.record_every + 2);
    records.push(make_record(&state, config)?);

    for k in 1..=n_steps {
        // uniform steps, with the final one shortened to land on t_end
        let dt_k = if k == n_steps {
            config.t_end - (k - 1) as f64 * config.dt
        } else {
            config.dt
        };
        state = step_with_dt(&state, config, dt_k)?;
        state.t = if k == n_steps {
            config.t_end
        } else {
            k as f64 * config.dt
        };
        if k % config.record_every == 0 || k == n_steps {
            records.push(make_record(&state, config)?);
        }
    }
    Ok(Trajectory { records })
}

fn make_record(state: &SimulationState, config: &SolverConfig) -> Result<TrajectoryRecord> {
    if state.rho.min_value() <= 0.0 {
        return Err(ModelError::TheoryViolation(format!(
            "positivity lost at t = {}: min density {}",
            state.t,
            state.rho.min_value()
        )));
    }
    let diagnostics = diagnostics::compute_record(state.t, &state.rho, config.momentum_tol)?;
    Ok(TrajectoryRecord {
        step_index: state.step_index,
        rho: state.rho.clone(),
        diagnostics,
    })
}

/// Solves the cyclic tridiagonal system by Sherman–Morrison with two
/// Thomas sweeps. Row i reads lower[i]·x_{i−1} + diag[i]·x_i + upper[i]·x_{i+1}
/// with periodic wrap, so the corner entries are A[0][n−1] = lower[0] and
/// A[n−1][0] = upper[n−1].
fn solve_cyclic_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return Err(ModelError::InvalidInput(
            "cyclic solve needs at least 3 unknowns".into(),
        ));
    }
    let corner_tr = lower[0];
    let corner_bl = upper[n - 1];
    let gamma = -diag[0];

    let mut modified = diag.to_vec();
    modified[0] -= gamma;
    modified[n - 1] -= corner_tr * corner_bl / gamma;

    let x1 = thomas(&lower[1..], &modified, &upper[..n - 1], rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner_bl;
    let z = thomas(&lower[1..], &modified, &upper[..n - 1], &u)?;

    let denom = 1.0 + z[0] + (corner_tr / gamma) * z[n - 1];
    if denom == 0.0 || !denom.is_finite() {
        return Err(ModelError::InvalidInput(
            "cyclic solve: singular Sherman-Morrison correction".into(),
        ));
    }
    let factor = (x1[0] + (corner_tr / gamma) * x1[n - 1]) / denom;
    Ok(x1.iter().zip(&z).map(|(x, zz)| x - factor * zz).collect())
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(ModelError::InvalidInput(
            "tridiagonal solve: zero pivot".into(),
        ));
    }
    d[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i - 1] * c[i];
        if beta == 0.0 {
            return Err(ModelError::InvalidInput(
                "tridiagonal solve: zero pivot".into(),
            ));
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / beta;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i + 1] * x[i + 1];
    }
    Ok(x)
}
