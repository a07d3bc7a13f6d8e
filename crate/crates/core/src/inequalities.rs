//! Numerical verification harness for the functional inequalities and
//! identities the decay analysis rests on: the localized logarithmic
//! Sobolev inequality, its Poincaré step, dissipation growth control, the
//! dI/dt identity, and the Laplacian-of-log identity.

use std::collections::BTreeMap;

use crate::diagnostics;
use crate::equilibrium::Direction;
use crate::error::{ModelError, Result};
use crate::fields::DensityField;
use crate::geometry::{CircleGrid, DerivBackend, DerivOrder};
use crate::solver::Trajectory;

/// Slack tolerance: absolute 1e−10 plus relative 1e−8.
pub const SLACK_ABS_TOL: f64 = 1e-10;
pub const SLACK_REL_TOL: f64 = 1e-8;

/// Uniform reporting for every inequality check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub context: BTreeMap<String, String>,
}

impl InequalityReport {
    fn new(name: &str, lhs: f64, rhs: f64, context: BTreeMap<String, String>) -> Result<Self> {
        if !lhs.is_finite() || !rhs.is_finite() {
            return Err(ModelError::NonFinite("inequality report sides"));
        }
        let slack = rhs - lhs;
        let tol = SLACK_ABS_TOL + SLACK_REL_TOL * rhs.abs();
        let mut context = context;
        context.insert("tol".into(), format!("{tol:e}"));
        Ok(Self {
            name: name.to_string(),
            lhs,
            rhs,
            slack,
            holds: slack >= -tol,
            context,
        })
    }
}

/// The localized log-Sobolev constant 2π² e^{2λ} (1 + ε_*/15)/(1 − 7ε_*/6),
/// valid for ε_* ∈ (0, 1/10].
pub fn lsi_constant(lambda: f64, eps_star: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if !(eps_star > 0.0 && eps_star <= 0.1) {
        return Err(ModelError::InvalidInput(format!(
            "eps_star must lie in (0, 1/10], got {eps_star}"
        )));
    }
    let pi = std::f64::consts::PI;
    Ok(
        2.0 * pi * pi * (2.0 * lambda).exp() * (1.0 + eps_star / 15.0)
            / (1.0 - 7.0 * eps_star / 6.0),
    )
}

/// Checks H(ρ|e^{−ψ}) ≤ C(λ, ε_*)·I(ρ|e^{−ψ}) after validating the three
/// hypotheses: unit reference mass, sup|ψ| ≤ λ, and ‖ρe^ψ − 1‖_∞ ≤ ε_*.
pub fn verify_lsi(
    rho: &DensityField,
    psi: &[f64],
    eps_star: f64,
    lambda: f64,
) -> Result<InequalityReport> {
    let grid = rho.grid();
    let constant = lsi_constant(lambda, eps_star)?;
    if psi.len() != grid.n_cells() {
        return Err(ModelError::InvalidInput(format!(
            "psi has {} values on a grid of {} cells",
            psi.len(),
            grid.n_cells()
        )));
    }
    let sup_psi = psi.iter().fold(0.0_f64, |acc, &p| acc.max(p.abs()));
    if sup_psi > lambda + 1e-12 {
        return Err(ModelError::Hypothesis(format!(
            "sup|psi| = {sup_psi} exceeds lambda = {lambda}"
        )));
    }
    let ref_values: Vec<f64> = psi.iter().map(|&p| (-p).exp()).collect();
    let mass = grid.quadrature(&ref_values)?;
    if (mass - 1.0).abs() > 1e-12 {
        return Err(ModelError::Hypothesis(format!(
            "e^(-psi) has mass {mass}, not a probability density"
        )));
    }
    let sup_ratio = rho
        .values()
        .iter()
        .zip(&ref_values)
        .map(|(&r, &m)| (r / m - 1.0).abs())
        .fold(0.0_f64, f64::max);
    if sup_ratio > eps_star + 1e-12 {
        return Err(ModelError::Hypothesis(format!(
            "sup|rho e^psi - 1| = {sup_ratio} exceeds eps_star = {eps_star}"
        )));
    }

    let reference = DensityField::from_values(grid, ref_values)?;
    let lhs = diagnostics::relative_entropy(rho, &reference)?;
    let rhs = constant * diagnostics::fisher_information(rho, &reference)?;
    let mut ctx = BTreeMap::new();
    ctx.insert("lambda".into(), format!("{lambda}"));
    ctx.insert("eps_star".into(), format!("{eps_star}"));
    ctx.insert("constant".into(), format!("{constant}"));
    ctx.insert("sup_ratio".into(), format!("{sup_ratio}"));
    ctx.insert("n_cells".into(), format!("{}", grid.n_cells()));
    InequalityReport::new("lsi", lhs, rhs, ctx)
}

/// Checks ∫ f² e^{−ψ} ≤ 4π² e^{2λ} ∫ |f′|² e^{−ψ} for an f with a zero.
/// The zero is pinned exactly by subtracting the value at the cell nearest
/// a sign change (or an exact zero).
pub fn verify_poincare(
    grid: &CircleGrid,
    f: &[f64],
    psi: &[f64],
    lambda: f64,
) -> Result<InequalityReport> {
    if f.len() != grid.n_cells() || psi.len() != grid.n_cells() {
        return Err(ModelError::InvalidInput(
            "f and psi must match the grid size".into(),
        ));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    let sup_psi = psi.iter().fold(0.0_f64, |acc, &p| acc.max(p.abs()));
    if sup_psi > lambda + 1e-12 {
        return Err(ModelError::Hypothesis(format!(
            "sup|psi| = {sup_psi} exceeds lambda = {lambda}"
        )));
    }

    let n = grid.n_cells();
    let pivot = if let Some(i) = f.iter().position(|&v| v == 0.0) {
        i
    } else {
        // a sign change between adjacent cells; pick the smaller-|f| side
        let mut found = None;
        for i in 0..n {
            let j = (i + 1) % n;
            if f[i] * f[j] < 0.0 {
                found = Some(if f[i].abs() <= f[j].abs() { i } else { j });
                break;
            }
        }
        found.ok_or_else(|| {
            ModelError::Hypothesis("f has no zero and no sign change on the grid".into())
        })?
    };
    let shifted: Vec<f64> = f.iter().map(|&v| v - f[pivot]).collect();

    let weight: Vec<f64> = psi.iter().map(|&p| (-p).exp()).collect();
    let f2w: Vec<f64> = shifted
        .iter()
        .zip(&weight)
        .map(|(&v, &w)| v * v * w)
        .collect();
    let lhs = grid.quadrature(&f2w)?;
    let df = grid.deriv(&shifted, DerivOrder::First, DerivBackend::Spectral)?;
    let df2w: Vec<f64> = df.iter().zip(&weight).map(|(&v, &w)| v * v * w).collect();
    let pi = std::f64::consts::PI;
    let constant = 4.0 * pi * pi * (2.0 * lambda).exp();
    let rhs = constant * grid.quadrature(&df2w)?;

    let mut ctx = BTreeMap::new();
    ctx.insert("lambda".into(), format!("{lambda}"));
    ctx.insert("constant".into(), format!("{constant}"));
    ctx.insert("pivot_cell".into(), format!("{pivot}"));
    ctx.insert("n_cells".into(), format!("{}", grid.n_cells()));
    InequalityReport::new("poincare", lhs, rhs, ctx)
}

/// Checks I(t) ≤ I(s)·e^{C(t,s)(t−s)} with C(t,s) = 2 + 2/min_{[s,t]}|J|.
pub fn dissipation_growth_check(
    trajectory: &Trajectory,
    s_index: usize,
    t_index: usize,
) -> Result<InequalityReport> {
    let recs = &trajectory.records;
    if s_index > t_index || t_index >= recs.len() {
        return Err(ModelError::InvalidInput(format!(
            "need s_index <= t_index < {}, got ({s_index}, {t_index})",
            recs.len()
        )));
    }
    let min_j = recs[s_index..=t_index]
        .iter()
        .map(|r| r.diagnostics.momentum.magnitude())
        .fold(f64::INFINITY, f64::min);
    if min_j <= 0.0 {
        return Err(ModelError::VanishingMomentum {
            magnitude: min_j,
            tol: 0.0,
            t: None,
        });
    }
    let t_s = recs[s_index].diagnostics.t;
    let t_t = recs[t_index].diagnostics.t;
    let rate = 2.0 + 2.0 / min_j;
    let lhs = recs[t_index].diagnostics.fisher_information;
    let rhs = recs[s_index].diagnostics.fisher_information * (rate * (t_t - t_s)).exp();
    let mut ctx = BTreeMap::new();
    ctx.insert("t_s".into(), format!("{t_s}"));
    ctx.insert("t_t".into(), format!("{t_t}"));
    ctx.insert("min_J".into(), format!("{min_j}"));
    ctx.insert("rate".into(), format!("{rate}"));
    InequalityReport::new("dissipation-growth", lhs, rhs, ctx)
}

/// Right-hand side of the dI/dt identity in angle coordinates, evaluated
/// at one record: with u = log(ρ/e^{ω·Ω}),
///   −2∫(u″)²ρ + 2∫(u′)²(−cos(θ−φ))ρ + (2/|J|)(|∫u′ ω⊥ ρ|² − (∫u′ (Ω·ω⊥) ρ)²).
fn didt_rhs(rho: &DensityField, omega: Direction, j_mag: f64) -> Result<f64> {
    let grid = rho.grid();
    let cos_n = grid.cos_nodes();
    let sin_n = grid.sin_nodes();
    let v = rho.values();
    if rho.min_value() <= 0.0 {
        return Err(ModelError::InvalidInput(
            "density must be strictly positive for the dI/dt identity".into(),
        ));
    }
    // u = log ρ − ω·Ω
    let u: Vec<f64> = (0..grid.n_cells())
        .map(|i| v[i].ln() - (cos_n[i] * omega.x() + sin_n[i] * omega.y()))
        .collect();
    let u1 = grid.deriv(&u, DerivOrder::First, DerivBackend::Spectral)?;
    let u2 = grid.deriv(&u, DerivOrder::Second, DerivBackend::Spectral)?;

    let mut hessian_sq = Vec::with_capacity(grid.n_cells());
    let mut drift_quad = Vec::with_capacity(grid.n_cells());
    let mut grad_x = Vec::with_capacity(grid.n_cells());
    let mut grad_y = Vec::with_capacity(grid.n_cells());
    let mut grad_omega = Vec::with_capacity(grid.n_cells());
    for i in 0..grid.n_cells() {
        hessian_sq.push(u2[i] * u2[i] * v[i]);
        // D²(ω·Ω) = −cos(θ−φ), analytic
        let cos_rel = cos_n[i] * omega.x() + sin_n[i] * omega.y();
        drift_quad.push(u1[i] * u1[i] * (-cos_rel) * v[i]);
        // embedded gradient ∇u = u′·ω⊥ with ω⊥ = (−sin θ, cos θ)
        grad_x.push(u1[i] * (-sin_n[i]) * v[i]);
        grad_y.push(u1[i] * cos_n[i] * v[i]);
        // Ω·ω⊥ = −sin(θ−φ)
        let sin_rel = sin_n[i] * omega.x() - cos_n[i] * omega.y();
        grad_omega.push(u1[i] * (-sin_rel) * v[i]);
    }
    let term1 = -2.0 * grid.quadrature(&hessian_sq)?;
    let term2 = 2.0 * grid.quadrature(&drift_quad)?;
    let gx = grid.quadrature(&grad_x)?;
    let gy = grid.quadrature(&grad_y)?;
    let proj = grid.quadrature(&grad_omega)?;
    let term3 = (2.0 / j_mag) * (gx * gx + gy * gy - proj * proj);
    Ok(term1 + term2 + term3)
}

/// Relative residual between the finite-difference dI/dt and the identity's
/// right-hand side at a record.
pub fn didt_identity_residual(trajectory: &Trajectory, index: usize) -> Result<f64> {
    let recs = &trajectory.records;
    if index == 0 || index + 1 >= recs.len() {
        return Err(ModelError::BoundaryIndex {
            index,
            len: recs.len(),
        });
    }
    let rec = &recs[index];
    let rhs = didt_rhs(
        &rec.rho,
        rec.diagnostics.omega,
        rec.diagnostics.momentum.magnitude(),
    )?;
    let dt = recs[index + 1].diagnostics.t - recs[index - 1].diagnostics.t;
    let fd = (recs[index + 1].diagnostics.fisher_information
        - recs[index - 1].diagnostics.fisher_information)
        / dt;
    Ok((fd - rhs).abs() / rhs.abs().max(1e-12))
}

/// First (nonpositive) term of the dI/dt identity, −2∫(u″)²ρ.
pub fn didt_contraction_term(rho: &DensityField, omega: Direction) -> Result<f64> {
    let grid = rho.grid();
    let cos_n = grid.cos_nodes();
    let sin_n = grid.sin_nodes();
    let v = rho.values();
    let u: Vec<f64> = (0..grid.n_cells())
        .map(|i| v[i].max(1e-300).ln() - (cos_n[i] * omega.x() + sin_n[i] * omega.y()))
        .collect();
    let u2 = grid.deriv(&u, DerivOrder::Second, DerivBackend::Spectral)?;
    let integrand: Vec<f64> = u2.iter().zip(v).map(|(&h, &r)| h * h * r).collect();
    Ok(-2.0 * grid.quadrature(&integrand)?)
}

/// Band-limited potential with exactly unit-mass e^{−ψ}, sup-norm `amp`
/// before the normalizing shift. Used to generate admissible pairs for the
/// log-Sobolev sweeps.
pub fn random_band_limited_potential(
    grid: &CircleGrid,
    amp: f64,
    max_mode: u32,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<f64> {
    use rand::Rng;
    let n = grid.n_cells();
    let mut psi = vec![0.0; n];
    let mut any = false;
    for k in 1..=max_mode {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let s: f64 = rng.gen_range(-1.0..1.0);
        any = true;
        for (i, &t) in grid.nodes().iter().enumerate() {
            psi[i] += c * (k as f64 * t).cos() + s * (k as f64 * t).sin();
        }
    }
    if any && amp > 0.0 {
        let sup = psi.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
        if sup > 0.0 {
            for p in psi.iter_mut() {
                *p *= amp / sup;
            }
        }
    } else {
        psi.iter_mut().for_each(|p| *p = 0.0);
    }
    let ref_vals: Vec<f64> = psi.iter().map(|&p| (-p).exp()).collect();
    let mass = grid
        .quadrature(&ref_vals)
        .expect("band-limited potential values are finite");
    for p in psi.iter_mut() {
        *p += mass.ln();
    }
    psi
}

/// Admissible density e^{−ψ}(1 + ε·g) with zero-weighted-mean, unit-sup g,
/// so the sup-ratio hypothesis is met with equality at ε.
pub fn perturbed_reference_density(
    grid: &std::sync::Arc<CircleGrid>,
    psi: &[f64],
    eps: f64,
    max_mode: u32,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<DensityField> {
    use rand::Rng;
    if eps.abs() >= 1.0 {
        return Err(ModelError::InvalidInput(format!(
            "perturbation eps must satisfy |eps| < 1, got {eps}"
        )));
    }
    let n = grid.n_cells();
    let refv: Vec<f64> = psi.iter().map(|&p| (-p).exp()).collect();
    let mut g = vec![0.0; n];
    for k in 1..=max_mode {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let s: f64 = rng.gen_range(-1.0..1.0);
        for (i, &t) in grid.nodes().iter().enumerate() {
            g[i] += c * (k as f64 * t).cos() + s * (k as f64 * t).sin();
        }
    }
    let weighted: Vec<f64> = g.iter().zip(&refv).map(|(&a, &b)| a * b).collect();
    let mean = grid.quadrature(&weighted)? / grid.quadrature(&refv)?;
    for gi in g.iter_mut() {
        *gi -= mean;
    }
    let sup = g.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    if sup == 0.0 {
        return Err(ModelError::InvalidInput(
            "degenerate perturbation in reference-density generator".into(),
        ));
    }
    let values: Vec<f64> = refv
        .iter()
        .zip(&g)
        .map(|(&m, &gi)| m * (1.0 + eps * gi / sup))
        .collect();
    let mass = grid.quadrature(&values)?;
    DensityField::from_values(grid, values.into_iter().map(|v| v / mass).collect())
}

/// Sup-norm residual of the pointwise identity
/// Δρ/ρ + ∇ψ·∇ρ/ρ + Δψ = Δw + |∇w|² − ∇ψ·∇w with w = log(ρ e^{ψ}).
pub fn laplog_identity_residual(rho: &DensityField, psi: &[f64]) -> Result<f64> {
    let grid = rho.grid();
    if psi.len() != grid.n_cells() {
        return Err(ModelError::InvalidInput(
            "psi must match the grid size".into(),
        ));
    }
    if rho.min_value() <= 0.0 {
        return Err(ModelError::InvalidInput(
            "density must be strictly positive for the log identity".into(),
        ));
    }
    let v = rho.values();
    let rho1 = grid.deriv(v, DerivOrder::First, DerivBackend::Spectral)?;
    let rho2 = grid.deriv(v, DerivOrder::Second, DerivBackend::Spectral)?;
    let psi1 = grid.deriv(psi, DerivOrder::First, DerivBackend::Spectral)?;
    let psi2 = grid.deriv(psi, DerivOrder::Second, DerivBackend::Spectral)?;
    let w: Vec<f64> = v.iter().zip(psi).map(|(&r, &p)| r.ln() + p).collect();
    let w1 = grid.deriv(&w, DerivOrder::First, DerivBackend::Spectral)?;
    let w2 = grid.deriv(&w, DerivOrder::Second, DerivBackend::Spectral)?;
    let mut worst = 0.0_f64;
    for i in 0..grid.n_cells() {
        let lhs = rho2[i] / v[i] + psi1[i] * rho1[i] / v[i] + psi2[i];
        let rhs = w2[i] + w1[i] * w1[i] - psi1[i] * w1[i];
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
