//! Closed-form decay-rate constants and envelopes, and their comparison
//! against simulated trajectories.
//!
//! The rate function collapses to the constant 1/C_* once the dissipation
//! has dropped below the admissibility threshold (at the detected time
//! T_0); before that it is exponentially small. All envelope integrals use
//! adaptive quadrature on the closed form, so they are independent of the
//! record spacing.

use crate::equilibrium;
use crate::error::{ModelError, Result};
use crate::inequalities::lsi_constant;
use crate::solver::Trajectory;

/// All constants entering the decay envelope.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RateConstants {
    pub c_m: f64,
    pub m: f64,
    /// λ = 1 + |log C_M|, the sup bound of the equilibrium potential.
    pub lambda: f64,
    pub eps_star: f64,
    pub c_star: f64,
    /// L = (2 + 4/m)^{−1} log 2.
    pub l: f64,
    pub t_star: f64,
    /// Detected dissipation-admissibility time; set by `detect_t0`.
    pub t0: Option<f64>,
    pub j0: f64,
    pub h0: f64,
}

impl RateConstants {
    /// The dissipation level C_M² e^{−2} ε_*² below which the localized
    /// log-Sobolev inequality applies.
    pub fn dissipation_threshold(&self) -> f64 {
        self.c_m * self.c_m * (-2.0_f64).exp() * self.eps_star * self.eps_star
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = Some(t0);
        self
    }

    fn require_t0(&self) -> Result<f64> {
        self.t0.ok_or_else(|| {
            ModelError::InvalidInput("rate constants incomplete: t0 has not been detected".into())
        })
    }
}

/// Populate every closed-form constant from the initial entropy and
/// momentum; `t0` is left unset.
pub fn compute_constants(h0: f64, j0: f64, eps_star: f64) -> Result<RateConstants> {
    if !(h0.is_finite() && h0 >= 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "initial relative entropy must be nonnegative, got {h0}"
        )));
    }
    if !(j0.is_finite() && j0 > 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "initial momentum must be positive, got {j0}"
        )));
    }
    let c_m = equilibrium::normalizer_cm();
    let m = equilibrium::equilibrium_momentum_m();
    let lambda = 1.0 + c_m.ln().abs();
    let c_star = lsi_constant(lambda, eps_star)?;
    let l = std::f64::consts::LN_2 / (2.0 + 4.0 / m);
    let diss = c_m * c_m * (-2.0_f64).exp() * eps_star * eps_star;
    let min_arg = diss.min(l / (2.0 * c_star) * diss).min(m / c_star);
    let t_star = 2.0 * h0 / min_arg;
    Ok(RateConstants {
        c_m,
        m,
        lambda,
        eps_star,
        c_star,
        l,
        t_star,
        t0: None,
        j0,
        h0,
    })
}

/// First record time in [0, T_*] whose dissipation is at or below half the
/// admissibility threshold. Existence within [0, T_*] is guaranteed by the
/// time-average argument; if the trajectory ends before T_* without a
/// qualifying record the data is merely too short, while a full covering
/// with no qualifying record is a reportable theory violation.
pub fn detect_t0(trajectory: &Trajectory, constants: &RateConstants) -> Result<f64> {
    let series: Vec<(f64, f64)> = trajectory
        .records
        .iter()
        .map(|r| (r.diagnostics.t, r.diagnostics.fisher_information))
        .collect();
    detect_t0_from_series(&series, constants)
}

/// Series variant of [`detect_t0`] over (time, dissipation) pairs, for
/// post-processing recorded data.
pub fn detect_t0_from_series(series: &[(f64, f64)], constants: &RateConstants) -> Result<f64> {
    if series.is_empty() {
        return Err(ModelError::TrajectoryTooShort {
            needed: constants.t_star,
            covered: 0.0,
        });
    }
    let threshold = 0.5 * constants.dissipation_threshold();
    let t_max = series.last().unwrap().0;
    for &(t, i) in series {
        if t > constants.t_star + 1e-12 {
            break;
        }
        if i <= threshold {
            return Ok(t);
        }
    }
    if t_max + 1e-12 >= constants.t_star {
        Err(ModelError::TheoryViolation(format!(
            "no record in [0, {}] has dissipation <= {threshold:e}",
            constants.t_star
        )))
    } else {
        Err(ModelError::TrajectoryTooShort {
            needed: constants.t_star,
            covered: t_max,
        })
    }
}

/// The decay-rate function: 1/C_* for t ≥ T_0, and
/// [β(t) + C_* e^{a(T_0−t)}]^{−1} with a = 2 + 2/(j0 e^{−T_0}) and
/// β(t) = (j0 e^{−T_0})/(2 j0 e^{−T_0} + 2)·(e^{a T_0} − e^{a t}) below it.
/// Positive parts are taken exactly as displayed; overflow in the
/// pre-T_0 branch saturates to B = 0.
pub fn b_function(t: f64, constants: &RateConstants) -> Result<f64> {
    let t0 = constants.require_t0()?;
    if t >= t0 {
        return Ok(1.0 / constants.c_star);
    }
    let jt = constants.j0 * (-t0).exp();
    let a = 2.0 + 2.0 / jt;
    let c = jt / (2.0 * jt + 2.0);
    // β(t) = c·e^{at}·(e^{a(t0−t)} − 1), products only, no inf − inf
    let beta = c * (a * t).exp() * (a * (t0 - t)).exp_m1();
    let denom = beta.max(0.0) + constants.c_star * (a * (t0 - t)).exp();
    Ok(if denom.is_finite() { 1.0 / denom } else { 0.0 })
}

/// ∫₀ᵗ B(s) ds: adaptive quadrature below T_0, exact slope 1/C_* above.
pub fn b_integral(t: f64, constants: &RateConstants) -> Result<f64> {
    let t0 = constants.require_t0()?;
    if t <= t0 {
        adaptive_b_segment(0.0, t, constants)
    } else {
        Ok(adaptive_b_segment(0.0, t0, constants)? + (t - t0) / constants.c_star)
    }
}

fn adaptive_b_segment(a: f64, b: f64, constants: &RateConstants) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let f = |t: f64| b_function(t, constants).unwrap_or(0.0);
    Ok(adaptive_simpson(&f, a, b, 1e-14))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Per-record decay envelope.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EnvelopePoint {
    pub t: f64,
    /// h0 · e^{−∫₀ᵗ B}
    pub h_bound: f64,
    /// h0 · (e^{−∫₀ᵗ B} + C·∫_t^∞ e^{−∫₀^r B} dr); C is configurable.
    pub l1_bound: f64,
}

/// Envelopes at the trajectory's record times. The tail constant comes in
/// unspecified from the theory and is exposed as a parameter.
pub fn decay_envelopes(
    trajectory: &Trajectory,
    constants: &RateConstants,
    tail_constant: f64,
) -> Result<Vec<EnvelopePoint>> {
    let times = trajectory.times();
    envelopes_at_times(&times, constants, tail_constant)
}

/// Envelope values at explicit times, for post-processing recorded data.
pub fn envelopes_at_times(
    times: &[f64],
    constants: &RateConstants,
    tail_constant: f64,
) -> Result<Vec<EnvelopePoint>> {
    let t0 = constants.require_t0()?;
    let prefix = adaptive_b_segment(0.0, t0, constants)?;
    let a_of = |t: f64| -> Result<f64> {
        if t <= t0 {
            adaptive_b_segment(0.0, t, constants)
        } else {
            Ok(prefix + (t - t0) / constants.c_star)
        }
    };
    // ∫_t^∞ e^{−A(r)} dr = segment up to T_0 plus the exact exponential tail
    let tail_from_t0 = constants.c_star * (-prefix).exp();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let a_t = a_of(t)?;
        let tail = if t >= t0 {
            constants.c_star * (-a_t).exp()
        } else {
            let f = |r: f64| (-a_of(r).unwrap_or(f64::INFINITY)).exp();
            adaptive_simpson(&f, t, t0, 1e-12) + tail_from_t0
        };
        out.push(EnvelopePoint {
            t,
            h_bound: constants.h0 * (-a_t).exp(),
            l1_bound: constants.h0 * ((-a_t).exp() + tail_constant * tail),
        });
    }
    Ok(out)
}

/// Asymptotic small-entropy rate 1/(2π² e^{2(1+|log C_M|)}) − ε.
pub fn asymptotic_rate_item3(epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    let lambda = 1.0 + equilibrium::normalizer_cm().ln().abs();
    let pi = std::f64::consts::PI;
    let base = 1.0 / (2.0 * pi * pi * (2.0 * lambda).exp());
    if epsilon >= base {
        return Err(ModelError::InvalidInput(format!(
            "epsilon = {epsilon} makes the rate nonpositive (base rate {base:e})"
        )));
    }
    Ok(base - epsilon)
}
