//! Exact one-dimensional optimal transport on the circle for the
//! 2-Wasserstein distance, plus the short-time stability and twin-run
//! uniqueness experiments.
//!
//! The squared distance is computed by quantile alignment: with
//! piecewise-linear CDFs from the cell masses and the periodic extension
//! Q(q + 1) = Q(q) + 2π of the quantile functions, the map
//!
//!   β ↦ ∫₀¹ (Q_b(q + β) − Q_a(q))² dq
//!
//! is convex in the cut parameter β, and shifting β by an integer shifts
//! every displacement by a full turn, so minimizing over β ∈ [−3/2, 3/2]
//! realizes the geodesic (arc length) ground cost. Segment integrals are
//! evaluated exactly with two-point Gauss quadrature between knots.

use crate::diagnostics;
use crate::equilibrium;
use crate::error::{ModelError, Result};
use crate::fields::{DensityField, Norm};
use crate::solver::{run, SolverConfig, Trajectory};

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TransportPlanSummary {
    pub w2: f64,
    /// Mass offset (cut parameter) achieving the minimum.
    pub optimal_cut: f64,
    pub iterations: u32,
}

/// Piecewise-linear quantile function of a density on the grid. Cell i
/// spreads its mass uniformly over [θ_i − Δθ/2, θ_i + Δθ/2).
struct Quantile {
    /// cumulative masses, c[0] = 0, c[n] = 1
    cum: Vec<f64>,
    /// cell edges e[k] = (k − 1/2)·Δθ
    edges: Vec<f64>,
}

impl Quantile {
    fn new(field: &DensityField) -> Self {
        let grid = field.grid();
        let n = grid.n_cells();
        let h = grid.spacing();
        let weights: Vec<f64> = field.values().iter().map(|&v| v * h).collect();
        let total: f64 = crate::geometry::kahan_sum(&weights);
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for &w in &weights {
            acc += w / total;
            cum.push(acc);
        }
        cum[n] = 1.0;
        let edges = (0..=n).map(|k| (k as f64 - 0.5) * h).collect();
        Self { cum, edges }
    }

    /// Q(q) for q ∈ [0, 1].
    fn eval(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        // rightmost k with cum[k] <= q
        let mut lo = 0usize;
        let mut hi = self.cum.len() - 1;
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if self.cum[mid] <= q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = self.cum[lo + 1] - self.cum[lo];
        if w <= 0.0 {
            self.edges[lo]
        } else {
            self.edges[lo] + (q - self.cum[lo]) / w * (self.edges[lo + 1] - self.edges[lo])
        }
    }

    /// Periodic extension Q(q + 1) = Q(q) + 2π.
    fn eval_extended(&self, s: f64) -> f64 {
        let m = s.floor();
        self.eval(s - m) + TAU * m
    }
}

/// Transport cost ∫ (Q_b(q+β) − Q_a(q))² dq with exact segment quadrature.
fn transport_cost(qa: &Quantile, qb: &Quantile, beta: f64) -> f64 {
    let mut knots: Vec<f64> = Vec::with_capacity(qa.cum.len() + 2 * qb.cum.len() + 2);
    knots.push(0.0);
    knots.push(1.0);
    for &c in &qa.cum {
        if c > 0.0 && c < 1.0 {
            knots.push(c);
        }
    }
    for &c in &qb.cum {
        // q + β = c + m for integer m
        for m in -2i32..=3 {
            let q = c + m as f64 - beta;
            if q > 0.0 && q < 1.0 {
                knots.push(q);
            }
        }
    }
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());

    const INV_SQRT3: f64 = 0.577_350_269_189_625_8;
    let mut cost = 0.0;
    let mut prev = knots[0];
    for &k in &knots[1..] {
        let len = k - prev;
        if len > 1e-15 {
            let mid = 0.5 * (prev + k);
            let off = 0.5 * len * INV_SQRT3;
            for q in [mid - off, mid + off] {
                let d = qb.eval_extended(q + beta) - qa.eval(q);
                cost += 0.5 * len * d * d;
            }
        }
        prev = k;
    }
    cost
}

/// 2-Wasserstein distance with geodesic ground cost, by golden-section
/// search over the cut parameter (the cost is convex in the cut).
pub fn w2_circle(a: &DensityField, b: &DensityField) -> Result<TransportPlanSummary> {
    if a.grid().n_cells() != b.grid().n_cells() {
        return Err(ModelError::GridMismatch {
            left: a.grid().n_cells(),
            right: b.grid().n_cells(),
        });
    }
    let mass_a = a.mass();
    let mass_b = b.mass();
    if (mass_a - mass_b).abs() > 1e-10 {
        return Err(ModelError::InvalidInput(format!(
            "mass mismatch: {mass_a} vs {mass_b}"
        )));
    }
    let qa = Quantile::new(a);
    let qb = Quantile::new(b);

    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut lo = -1.5;
    let mut hi = 1.5;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = transport_cost(&qa, &qb, x1);
    let mut f2 = transport_cost(&qa, &qb, x2);
    let mut iterations = 0u32;
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = transport_cost(&qa, &qb, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = transport_cost(&qa, &qb, x2);
        }
        iterations += 1;
    }
    let cut = 0.5 * (lo + hi);
    let cost = transport_cost(&qa, &qb, cut).min(f1).min(f2);
    Ok(TransportPlanSummary {
        w2: cost.max(0.0).sqrt(),
        optimal_cut: cut,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct StabilityRow {
    pub t: f64,
    pub w2: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StabilityReport {
    pub j0: f64,
    pub h0_max: f64,
    /// Horizon δ = |J_0|⁴ / (2⁸ max(H, H̄)).
    pub delta: f64,
    pub w2_initial: f64,
    pub hypothesis_cap: f64,
    /// Growth exponent 1 + 2/|J_0| (circle case).
    pub growth_rate: f64,
    pub rows: Vec<StabilityRow>,
    pub all_hold: bool,
}

/// Twin-run short-time stability: checks W₂(t) ≤ e^{(1+2/|J_0|)t} W₂(0)
/// for every record below the horizon δ. Requires the closeness
/// hypothesis W₂(0) ≤ |J_0|/16.
pub fn stability_experiment(
    rho0: &DensityField,
    rho0_bar: &DensityField,
    config: &SolverConfig,
) -> Result<StabilityReport> {
    let d0 = diagnostics::compute_record(0.0, rho0, config.momentum_tol)?;
    let d0_bar = diagnostics::compute_record(0.0, rho0_bar, config.momentum_tol)?;
    let j0 = d0.momentum.magnitude();
    let h0_max = d0.relative_entropy.max(d0_bar.relative_entropy);
    let w2_initial = w2_circle(rho0, rho0_bar)?.w2;
    let hypothesis_cap = j0 / 16.0;
    if w2_initial > hypothesis_cap + 1e-12 {
        return Err(ModelError::Hypothesis(format!(
            "W2(rho0, rho0_bar) = {w2_initial} exceeds |J0|/16 = {hypothesis_cap}"
        )));
    }
    let delta = j0.powi(4) / (256.0 * h0_max);
    let growth_rate = 1.0 + 2.0 / j0;

    let traj_a = run(rho0, config)?;
    let traj_b = run(rho0_bar, config)?;
    let mut rows = Vec::new();
    let mut all_hold = true;
    for (ra, rb) in traj_a.records.iter().zip(&traj_b.records) {
        let t = ra.diagnostics.t;
        if t >= delta {
            break;
        }
        let w2 = w2_circle(&ra.rho, &rb.rho)?.w2;
        let bound = (growth_rate * t).exp() * w2_initial;
        let holds = w2 <= bound + 1e-10 + 1e-8 * bound;
        all_hold &= holds;
        rows.push(StabilityRow {
            t,
            w2,
            bound,
            holds,
        });
    }
    Ok(StabilityReport {
        j0,
        h0_max,
        delta,
        w2_initial,
        hypothesis_cap,
        growth_rate,
        rows,
        all_hold,
    })
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub enum TwinPerturbation {
    /// ρ̄_0 ∝ ρ_0 (1 + amplitude·cos 3θ)
    Multiplicative { amplitude: f64 },
    /// ρ̄_0 = ρ_0 rotated by the given angle (the neutral direction).
    Rotation { angle: f64 },
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct UniquenessRow {
    pub t: f64,
    pub l2_diff: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct UniquenessReport {
    /// Two runs from identical data produce bit-identical records.
    pub identical_twins_bitwise: bool,
    pub initial_l2: f64,
    /// max over record pairs of d/dt log‖Δ‖₂² divided by (1 + e^{2t}).
    pub fitted_gronwall_c: f64,
    pub perturbation: TwinPerturbation,
    pub rows: Vec<UniquenessRow>,
}

/// Twin-run separation experiment: integrates ρ_0 and a perturbed copy to
/// `t_probe`, reports the L² separation per record and the fitted Grönwall
/// rate, and checks determinism of identical twins at bit level.
pub fn uniqueness_experiment(
    rho0: &DensityField,
    config: &SolverConfig,
    t_probe: f64,
    perturbation: TwinPerturbation,
) -> Result<UniquenessReport> {
    if !(t_probe.is_finite() && t_probe > 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "t_probe must be positive, got {t_probe}"
        )));
    }
    let mut cfg = config.clone();
    cfg.t_end = t_probe;

    let traj_a = run(rho0, &cfg)?;
    let traj_a2 = run(rho0, &cfg)?;
    let identical = bitwise_equal(&traj_a, &traj_a2);

    let rho_bar = match perturbation {
        TwinPerturbation::Multiplicative { amplitude } => {
            let grid = rho0.grid();
            let raw: Vec<f64> = rho0
                .values()
                .iter()
                .zip(grid.nodes())
                .map(|(&v, &t)| v * (1.0 + amplitude * (3.0 * t).cos()))
                .collect();
            let mass = grid.quadrature(&raw)?;
            DensityField::from_values(grid, raw.into_iter().map(|v| v / mass).collect())?
        }
        TwinPerturbation::Rotation { angle } => rho0.rotated(angle)?,
    };
    let traj_b = run(&rho_bar, &cfg)?;

    let mut rows = Vec::new();
    for (ra, rb) in traj_a.records.iter().zip(&traj_b.records) {
        rows.push(UniquenessRow {
            t: ra.diagnostics.t,
            l2_diff: ra.rho.distance(&rb.rho, Norm::L2)?,
        });
    }
    let initial_l2 = rows.first().map(|r| r.l2_diff).unwrap_or(0.0);
    let mut fitted = f64::NEG_INFINITY;
    for pair in rows.windows(2) {
        let (r0, r1) = (pair[0], pair[1]);
        if r0.l2_diff > 0.0 && r1.l2_diff > 0.0 {
            let rate = (r1.l2_diff.powi(2).ln() - r0.l2_diff.powi(2).ln()) / (r1.t - r0.t);
            fitted = fitted.max(rate / (1.0 + (2.0 * r0.t).exp()));
        }
    }
    if !fitted.is_finite() {
        fitted = 0.0;
    }
    Ok(UniquenessReport {
        identical_twins_bitwise: identical,
        initial_l2,
        fitted_gronwall_c: fitted,
        perturbation,
        rows,
    })
}

fn bitwise_equal(a: &Trajectory, b: &Trajectory) -> bool {
    a.len() == b.len()
        && a.records.iter().zip(&b.records).all(|(ra, rb)| {
            ra.rho
                .values()
                .iter()
                .zip(rb.rho.values())
                .all(|(x, y)| x.to_bits() == y.to_bits())
        })
}

/// Fisher–von Mises initial data helper shared by the experiments: a
/// seeded perturbation around the equilibrium pointing along `phi`.
pub fn perturbed_initial(
    grid: &std::sync::Arc<crate::geometry::CircleGrid>,
    phi: f64,
    eps: f64,
    mode: u32,
    seed: u64,
) -> Result<DensityField> {
    DensityField::perturbed_equilibrium(
        grid,
        equilibrium::Direction::from_angle(phi),
        eps,
        mode,
        seed,
    )
}
